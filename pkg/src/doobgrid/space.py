"""Finite filtered probability spaces over dyadic grids.

A :class:`FilteredSpace` couples a finite outcome set, strictly positive
probability weights and one partition of the outcomes per grid time.
Partitions must refine as time advances; this is the finite form of an
increasing information flow.  Conditional expectation is the
probability-weighted block average, so the tower property, linearity and
positivity hold up to binary64 rounding (we compare at 1e-12 throughout).

All values are immutable after construction and every method is a pure
function of its inputs, so instances may be shared freely across
workers.
"""
from __future__ import annotations

import json
from typing import Iterable, Sequence

import numpy as np

from .dyadic import DyadicGrid
from .errors import BadWeights, IndexOutOfGrid, NonRefining

TOL = 1e-12


def _canonical(labels: np.ndarray) -> np.ndarray:
    """Relabel block ids to a contiguous 0..B-1 range."""
    _, inv = np.unique(labels, return_inverse=True)
    return inv.astype(np.int64)


class FilteredSpace:
    """Finite outcome set with probabilities and a refining filtration.

    Parameters
    ----------
    grid:
        The master dyadic grid; the filtration has one partition per
        grid point.
    prob:
        Strictly positive weights summing to one (within 1e-12).
    labels:
        Integer array of shape ``(num_points, n_outcomes)``; row ``k``
        assigns each outcome to its block of the time-``t_k`` partition.
    """

    __slots__ = ("grid", "outcomes", "prob", "labels", "space_id")

    def __init__(
        self,
        grid: DyadicGrid,
        prob: np.ndarray,
        labels: np.ndarray,
        outcomes: Sequence[str] | None = None,
        space_id: str = "space",
    ) -> None:
        prob = np.asarray(prob, dtype=float).copy()
        if prob.ndim != 1 or prob.size == 0:
            raise BadWeights("weights must form a nonempty 1-D array")
        if np.any(prob <= 0) or not np.all(np.isfinite(prob)):
            raise BadWeights("weights must be strictly positive and finite")
        if abs(float(prob.sum()) - 1.0) > TOL:
            raise BadWeights(f"weights sum to {prob.sum()!r}, not 1")
        m = prob.size
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (grid.num_points, m):
            raise NonRefining(
                f"label matrix must have shape {(grid.num_points, m)}"
            )
        labels = np.vstack([_canonical(row) for row in labels])
        for k in range(grid.num_points - 1):
            finer, coarse = labels[k + 1], labels[k]
            rep = np.empty(finer.max() + 1, dtype=np.int64)
            rep[finer] = coarse
            if not np.array_equal(rep[finer], coarse):
                raise NonRefining(
                    f"partition at index {k + 1} does not refine index {k}"
                )
        if outcomes is None:
            outcomes = tuple(f"w{i}" for i in range(m))
        else:
            outcomes = tuple(str(o) for o in outcomes)
            if len(outcomes) != m or len(set(outcomes)) != m:
                raise BadWeights("outcome ids must be distinct, one per weight")
        prob.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "space_id", str(space_id))

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("FilteredSpace is immutable")

    @property
    def n_outcomes(self) -> int:
        return self.prob.size

    @property
    def terminal_index(self) -> int:
        return self.grid.num_steps

    def _check_index(self, k: int) -> int:
        if not 0 <= k <= self.grid.num_steps:
            raise IndexOutOfGrid(f"grid index {k} outside 0..{self.grid.num_steps}")
        return int(k)

    def expectation(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.prob @ x)

    def conditional_expectation(self, x: np.ndarray, k: int) -> np.ndarray:
        """E[x | F_{t_k}] as an outcome vector (block-constant)."""
        k = self._check_index(k)
        x = np.asarray(x, dtype=float)
        lab = self.labels[k]
        nb = int(lab.max()) + 1
        wx = np.bincount(lab, weights=self.prob * x, minlength=nb)
        w = np.bincount(lab, weights=self.prob, minlength=nb)
        return (wx / w)[lab]

    def is_measurable(self, x: np.ndarray, k: int, tol: float = TOL) -> bool:
        """True iff x is constant on every block of the time-t_k partition."""
        k = self._check_index(k)
        return self.constant_on_blocks(np.asarray(x, dtype=float), self.labels[k], tol)

    @staticmethod
    def constant_on_blocks(x: np.ndarray, lab: np.ndarray, tol: float = TOL) -> bool:
        rep = np.empty(int(lab.max()) + 1, dtype=float)
        rep[lab] = x
        return bool(np.max(np.abs(x - rep[lab])) <= tol)

    def blocks_at(self, k: int) -> list[np.ndarray]:
        """Blocks of the time-t_k partition as outcome-index arrays."""
        lab = self.labels[self._check_index(k)]
        order = np.argsort(lab, kind="stable")
        splits = np.flatnonzero(np.diff(lab[order])) + 1
        return [np.sort(b) for b in np.split(order, splits)]

    def stopped_labels(self, idx: np.ndarray) -> np.ndarray:
        """Partition generated by the stopped sigma algebra of a random index.

        Two outcomes are equivalent iff the index agrees and they share a
        block at that (clipped) time.  Indices beyond the grid (infinity
        sentinel) are grouped at the terminal partition.
        """
        idx = np.asarray(idx, dtype=np.int64)
        eff = np.minimum(idx, self.grid.num_steps)
        lab = self.labels[eff, np.arange(self.n_outcomes)]
        key = idx * (np.int64(lab.max()) + 2) + lab
        return _canonical(key)

    # -- serialization ---------------------------------------------------

    def to_json(self) -> str:
        parts = [
            [sorted(int(i) for i in b) for b in self.blocks_at(k)]
            for k in range(self.grid.num_points)
        ]
        payload = {
            "space_id": self.space_id,
            "master_level": self.grid.master_level,
            "outcomes": list(self.outcomes),
            "weights": [float(w) for w in self.prob],
            "partitions": parts,
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "FilteredSpace":
        payload = json.loads(text)
        grid = DyadicGrid(int(payload["master_level"]))
        return build_filtered_space(
            grid,
            payload["weights"],
            payload["partitions"],
            outcomes=payload.get("outcomes"),
            space_id=payload.get("space_id", "space"),
        )

    def __repr__(self) -> str:
        return (
            f"FilteredSpace(id={self.space_id!r}, level={self.grid.master_level},"
            f" outcomes={self.n_outcomes})"
        )


def _labels_from_blocks(
    blocks: Iterable[Iterable], outcomes: Sequence[str], m: int
) -> np.ndarray:
    by_id = {o: i for i, o in enumerate(outcomes)}
    lab = np.full(m, -1, dtype=np.int64)
    for b, block in enumerate(blocks):
        for o in block:
            if isinstance(o, str):
                if o not in by_id:
                    raise NonRefining(f"unknown outcome id {o!r} in partition")
                i = by_id[o]
            else:
                i = int(o)
                if not 0 <= i < m:
                    raise NonRefining(f"outcome index {i} out of range")
            if lab[i] != -1:
                raise NonRefining(f"outcome {o!r} appears in two blocks")
            lab[i] = b
    if np.any(lab < 0):
        raise NonRefining("partition does not cover all outcomes")
    return lab


def build_filtered_space(
    grid: DyadicGrid,
    weights: Sequence[float],
    partitions: Sequence[Iterable[Iterable]],
    outcomes: Sequence[str] | None = None,
    space_id: str = "space",
) -> FilteredSpace:
    """Validate raw weights and block lists into a :class:`FilteredSpace`.

    ``partitions`` holds one partition per grid point, each a list of
    blocks; blocks may contain outcome ids or integer outcome indices.
    Raises :class:`BadWeights` on invalid weights and :class:`NonRefining`
    when a partition fails to cover, overlaps, or coarsens in time.
    """
    prob = np.asarray(weights, dtype=float)
    m = prob.size
    if outcomes is None:
        outcomes = tuple(f"w{i}" for i in range(m))
    else:
        outcomes = tuple(str(o) for o in outcomes)
    if len(partitions) != grid.num_points:
        raise NonRefining(
            f"expected {grid.num_points} partitions, got {len(partitions)}"
        )
    labels = np.vstack(
        [_labels_from_blocks(p, outcomes, m) for p in partitions]
    )
    return FilteredSpace(grid, prob, labels, outcomes=outcomes, space_id=space_id)
