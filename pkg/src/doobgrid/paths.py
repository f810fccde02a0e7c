"""Cadlag path ensembles on the master grid.

A :class:`ProcessPaths` stores one value per (grid index, outcome) and
represents the piecewise-constant right-continuous path
``t -> values[max{k: t_k <= t}]``.  The left limit at ``t_k`` is the
value at ``t_{k-1}``, with the convention that the left limit at 0 is
the value at 0, and jumps at time infinity are zero.

Stopping times are per-outcome grid indices with an infinity sentinel
that compares above every grid time.  All operations are pure functions
over immutable inputs.
"""
from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .dyadic import as_fraction
from .errors import (
    BadPartition,
    EmptyList,
    NonzeroStart,
    NotAdapted,
    NotIncreasing,
)
from .space import TOL, FilteredSpace

#: Sentinel index representing time infinity; larger than any grid index.
INF_IDX = np.int64(1) << 40

PathLike = Union["ProcessPaths", np.ndarray, Sequence[float]]


class ProcessPaths:
    """Value matrix (grid index x outcome) for a path ensemble."""

    __slots__ = ("space", "values", "_adapted")

    def __init__(self, space: FilteredSpace, values: np.ndarray) -> None:
        arr = np.array(values, dtype=float)
        expected = (space.grid.num_points, space.n_outcomes)
        if arr.shape != expected:
            raise ValueError(f"values must have shape {expected}, got {arr.shape}")
        arr.setflags(write=False)
        self.space = space
        self.values = arr
        self._adapted: bool | None = None

    @classmethod
    def constant(cls, space: FilteredSpace, c: float) -> "ProcessPaths":
        return cls(space, np.full((space.grid.num_points, space.n_outcomes), float(c)))

    @classmethod
    def deterministic(cls, space: FilteredSpace, path: Sequence[float]) -> "ProcessPaths":
        """Same deterministic path on every outcome."""
        col = np.asarray(path, dtype=float).reshape(-1, 1)
        return cls(space, np.broadcast_to(col, (col.shape[0], space.n_outcomes)))

    @classmethod
    def from_terminal(cls, space: FilteredSpace, terminal: np.ndarray) -> "ProcessPaths":
        """Martingale closed by ``terminal``: row k is E[terminal | F_{t_k}]."""
        rows = [
            space.conditional_expectation(terminal, k)
            for k in range(space.grid.num_points)
        ]
        return cls(space, np.vstack(rows))

    @property
    def is_adapted(self) -> bool:
        if self._adapted is None:
            self._adapted = all(
                self.space.is_measurable(self.values[k], k)
                for k in range(self.space.grid.num_points)
            )
        return self._adapted

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def __repr__(self) -> str:
        return f"ProcessPaths(space={self.space.space_id!r}, shape={self.values.shape})"

    # -- serialization ---------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "space_id": self.space.space_id,
                "values": [float(v) for v in self.values.ravel()],
            }
        )

    @classmethod
    def from_json(cls, space: FilteredSpace, text: str) -> "ProcessPaths":
        payload = json.loads(text)
        shape = (space.grid.num_points, space.n_outcomes)
        return cls(space, np.asarray(payload["values"], dtype=float).reshape(shape))

    def to_csv(self) -> str:
        """CSV export with columns (time, outcome, value)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["time", "outcome", "value"])
        times = self.space.grid.float_times()
        for k in range(self.space.grid.num_points):
            for i, o in enumerate(self.space.outcomes):
                writer.writerow([repr(float(times[k])), o, repr(float(self.values[k, i]))])
        return buf.getvalue()


def left_limit_process(P: ProcessPaths) -> ProcessPaths:
    """Path of left limits: index k holds the value at k-1 (row 0 kept)."""
    v = P.values
    return ProcessPaths(P.space, np.vstack([v[:1], v[:-1]]))


def jump_process(P: ProcessPaths) -> ProcessPaths:
    """P minus its left limits; zero at index 0."""
    return ProcessPaths(P.space, P.values - left_limit_process(P).values)


def variation_process(P: ProcessPaths) -> ProcessPaths:
    """Running total variation; starts at 0 and is increasing."""
    jumps = np.abs(np.diff(P.values, axis=0))
    var = np.vstack([np.zeros((1, P.values.shape[1])), np.cumsum(jumps, axis=0)])
    return ProcessPaths(P.space, var)


def jordan_split(A: ProcessPaths, tol: float = TOL) -> tuple[ProcessPaths, ProcessPaths]:
    """Split a path starting at zero into increasing parts (var(A) +- A)/2.

    The minus part is computed as plus - A so that the reconstruction
    ``plus - minus == A`` holds bitwise; both parts start at 0 and are
    increasing up to rounding.
    """
    if np.max(np.abs(A.values[0])) > tol:
        raise NonzeroStart("jordan_split requires A_0 = 0")
    var = variation_process(A).values
    plus = (var + A.values) / 2.0
    minus = plus - A.values
    return ProcessPaths(A.space, plus), ProcessPaths(A.space, minus)


def _path_rows(f: PathLike, space: FilteredSpace) -> np.ndarray:
    if isinstance(f, ProcessPaths):
        return f.values
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 1:
        return np.broadcast_to(arr.reshape(-1, 1), (arr.size, space.n_outcomes))
    return arr


def stieltjes_left(f: PathLike, g: ProcessPaths, tol: float = TOL) -> np.ndarray:
    """Pathwise integral of the left limits of f against dg over (0, 1].

    Exact for grid step paths: per outcome it is
    ``sum_k f[k-1] * (g[k] - g[k-1])``.  g must be increasing per outcome.
    """
    dg = np.diff(g.values, axis=0)
    if np.min(dg) < -tol:
        raise NotIncreasing("integrator must be increasing per outcome")
    fv = _path_rows(f, g.space)
    return np.sum(fv[:-1] * dg, axis=0)


def partition_sum(
    f: Callable[[Fraction], float],
    g: Callable[[Fraction], float],
    pi: Sequence,
) -> float:
    """sum_i f(t_i) (g(t_{i+1}) - g(t_i)) over a partition of [0, 1].

    The partition must be sorted with endpoints 0 and 1.  Points are
    converted to exact rationals before evaluation, so polynomial
    integrands yield exact rational sums.
    """
    pts = [as_fraction(t) for t in pi]
    if len(pts) < 2 or pts[0] != 0 or pts[-1] != 1:
        raise BadPartition("partition needs sorted points with endpoints 0 and 1")
    if any(b < a for a, b in zip(pts, pts[1:])):
        raise BadPartition("partition points must be sorted")
    total = sum(f(a) * (g(b) - g(a)) for a, b in zip(pts, pts[1:]))
    return float(total)


class GridStoppingTime:
    """Per-outcome grid index, or INF_IDX for 'never'."""

    __slots__ = ("space", "idx")

    def __init__(self, space: FilteredSpace, idx: np.ndarray) -> None:
        arr = np.array(idx, dtype=np.int64)
        if arr.shape != (space.n_outcomes,):
            raise ValueError("one index per outcome required")
        ok = (arr == INF_IDX) | ((0 <= arr) & (arr <= space.grid.num_steps))
        if not np.all(ok):
            raise ValueError("indices must lie on the grid or equal INF_IDX")
        arr.setflags(write=False)
        self.space = space
        self.idx = arr

    @classmethod
    def deterministic(cls, space: FilteredSpace, t) -> "GridStoppingTime":
        k = space.grid.index_of(t)
        return cls(space, np.full(space.n_outcomes, k, dtype=np.int64))

    @classmethod
    def never(cls, space: FilteredSpace) -> "GridStoppingTime":
        return cls(space, np.full(space.n_outcomes, INF_IDX, dtype=np.int64))

    @classmethod
    def from_times(cls, space: FilteredSpace, times: Mapping[str, object]) -> "GridStoppingTime":
        idx = np.empty(space.n_outcomes, dtype=np.int64)
        pos = {o: i for i, o in enumerate(space.outcomes)}
        for o, t in times.items():
            if (isinstance(t, str) and t == "inf") or t == float("inf"):
                idx[pos[o]] = INF_IDX
            else:
                idx[pos[o]] = space.grid.index_of(t)
        return cls(space, idx)

    def times(self) -> list:
        """Grid times as Fractions, with float('inf') for the sentinel."""
        out = []
        for k in self.idx:
            out.append(float("inf") if k == INF_IDX else self.space.grid.time_of(int(k)))
        return out

    def float_times(self, inf_as: float = np.inf) -> np.ndarray:
        t = self.idx.astype(float) / self.space.grid.num_steps
        t[self.idx == INF_IDX] = inf_as
        return t

    def is_stopping_time(self) -> bool:
        """True iff {tau <= t_k} is a union of F_{t_k}-blocks for every k."""
        space = self.space
        for k in range(space.grid.num_points):
            hit = (self.idx <= k).astype(float)
            if not space.is_measurable(hit, k):
                return False
        return True

    def indicator(self) -> ProcessPaths:
        """The path 1_{[tau, infinity)} restricted to the grid."""
        K = self.space.grid.num_steps
        rows = (np.arange(K + 1)[:, None] >= self.idx[None, :]).astype(float)
        return ProcessPaths(self.space, rows)

    def graph(self) -> set[tuple[int, int]]:
        """Finite part of the graph as (grid index, outcome index) pairs."""
        return {(int(k), i) for i, k in enumerate(self.idx) if k != INF_IDX}

    def pointwise_min(self, other: "GridStoppingTime") -> "GridStoppingTime":
        return GridStoppingTime(self.space, np.minimum(self.idx, other.idx))

    def pointwise_max(self, other: "GridStoppingTime") -> "GridStoppingTime":
        return GridStoppingTime(self.space, np.maximum(self.idx, other.idx))

    def clamp_to_horizon(self) -> "GridStoppingTime":
        """min(tau, 1): the sentinel becomes the terminal grid index."""
        return GridStoppingTime(
            self.space, np.minimum(self.idx, self.space.grid.num_steps)
        )

    def to_json(self) -> str:
        payload = {}
        for o, k in zip(self.space.outcomes, self.idx):
            payload[o] = "inf" if k == INF_IDX else float(Fraction(int(k), self.space.grid.num_steps))
        return json.dumps(payload)

    @classmethod
    def from_json(cls, space: FilteredSpace, text: str) -> "GridStoppingTime":
        return cls.from_times(space, json.loads(text))

    def __repr__(self) -> str:
        return f"GridStoppingTime({[str(t) for t in self.times()]})"


class OptionalPartition:
    """Pointwise increasing finite sequence of grid stopping times."""

    __slots__ = ("members",)

    def __init__(self, members: Iterable[GridStoppingTime]) -> None:
        members = tuple(members)
        for a, b in zip(members, members[1:]):
            if np.any(b.idx < a.idx):
                raise NotIncreasing("optional partition must increase pointwise")
        self.members = members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i: int) -> GridStoppingTime:
        return self.members[i]

    def value_sets(self) -> list[set]:
        """Per outcome, the set of attained index values (incl. sentinel)."""
        if not self.members:
            return [set() for _ in range(0)]
        m = self.members[0].space.n_outcomes
        return [
            {int(s.idx[i]) for s in self.members} for i in range(m)
        ]

    @classmethod
    def deterministic(cls, space: FilteredSpace, times: Sequence) -> "OptionalPartition":
        return cls([GridStoppingTime.deterministic(space, t) for t in times])


def evaluate_at(
    P: ProcessPaths, tau: GridStoppingTime, left_limit: bool = False
) -> np.ndarray:
    """P at the stopping time; the sentinel evaluates the terminal row.

    With ``left_limit`` the value one index earlier is used, with the
    conventions value(0-) = value(0) and value(inf-) = terminal value.
    """
    K = P.space.grid.num_steps
    idx = np.minimum(tau.idx, K)
    if left_limit:
        idx = np.where(tau.idx == INF_IDX, K, np.maximum(tau.idx - 1, 0))
        idx = np.minimum(idx, K)
    return P.values[idx, np.arange(P.space.n_outcomes)]


def jump_at(P: ProcessPaths, tau: GridStoppingTime) -> np.ndarray:
    """Jump of P at tau, zero where tau is infinite."""
    jumps = jump_process(P)
    val = evaluate_at(jumps, tau)
    return np.where(tau.idx == INF_IDX, 0.0, val)


def optional_partition_sum(
    N: ProcessPaths, B: ProcessPaths, pi: OptionalPartition | Sequence[GridStoppingTime]
) -> np.ndarray:
    """sum_j N_{s_{j-1}} (B_{s_j} - B_{s_{j-1}}) along the partition.

    Evaluated pathwise, so it matches the same sum taken along the
    per-outcome real sequences; repeated values contribute nothing.
    """
    if not isinstance(pi, OptionalPartition):
        pi = OptionalPartition(pi)
    m = N.space.n_outcomes
    out = np.zeros(m)
    for prev, cur in zip(pi.members, pi.members[1:]):
        out += evaluate_at(N, prev) * (evaluate_at(B, cur) - evaluate_at(B, prev))
    return out


def merge_optional_partitions(
    pi: OptionalPartition, pihat: OptionalPartition
) -> OptionalPartition:
    """Ordered union of two optional partitions.

    The members are the canonical increasing family

        s_0 ^ h_j,  s_n,  s_n v (h_j ^ s_{n+1}),  s_N,  s_N v h_j

    whose per-outcome value sets equal the union of the inputs' value
    sets; each member is again a stopping time because pointwise minima
    and maxima of stopping times are stopping times.
    """
    if not pihat.members:
        return pi
    if not pi.members:
        return pihat
    s = pi.members
    h = pihat.members
    out: list[GridStoppingTime] = []
    out.extend(s[0].pointwise_min(hj) for hj in h)
    for n in range(len(s) - 1):
        out.append(s[n])
        out.extend(s[n].pointwise_max(hj.pointwise_min(s[n + 1])) for hj in h)
    out.append(s[-1])
    out.extend(s[-1].pointwise_max(hj) for hj in h)
    return OptionalPartition(out)


def is_pi_predictable(
    B: ProcessPaths, pi: OptionalPartition, tol: float = TOL
) -> bool:
    """Check the step form B = 1_{{0}} B_0 + sum_n 1_{(s_{n-1}, s_n]} B_{s_n}.

    Requires the pathwise identity to hold (value zero outside the
    covered intervals) together with the measurability certificates:
    B_0 at time 0 and each sampled value B_{s_n} with respect to the
    stopped partition of s_{n-1}.
    """
    space = B.space
    K = space.grid.num_steps
    m = space.n_outcomes
    members = pi.members
    if not space.is_measurable(B.values[0], 0, tol):
        return False
    rhs = np.zeros_like(B.values)
    rhs[0] = B.values[0]
    if members:
        stack = np.stack([s.idx for s in members], axis=0)  # (R, m)
        sampled = np.stack([evaluate_at(B, s) for s in members], axis=0)
        for i in range(m):
            col = stack[:, i]
            pos = np.searchsorted(col, np.arange(1, K + 1), side="left")
            covered = (pos >= 1) & (pos < col.size)
            ks = np.arange(1, K + 1)[covered]
            rhs[ks, i] = sampled[pos[covered], i]
        for n in range(1, len(members)):
            lab = space.stopped_labels(members[n - 1].idx)
            if not FilteredSpace.constant_on_blocks(sampled[n], lab, tol):
                return False
    return bool(np.max(np.abs(B.values - rhs)) <= tol)


def martingale_defect(P: ProcessPaths) -> float:
    """max_k max_w |E[P_{k+1} | F_{t_k}] - P_k|; zero iff P is a martingale."""
    if not P.is_adapted:
        raise NotAdapted("martingale_defect requires an adapted process")
    space = P.space
    worst = 0.0
    for k in range(space.grid.num_steps):
        ce = space.conditional_expectation(P.values[k + 1], k)
        worst = max(worst, float(np.max(np.abs(ce - P.values[k]))))
    return worst


def martingale_basis(space: FilteredSpace) -> list[ProcessPaths]:
    """Martingales closed by the outcome indicators.

    Expectations of stopped/jump functionals are linear in the terminal
    value, so vanishing on this family certifies vanishing for every
    bounded martingale on the space.
    """
    basis = []
    for i in range(space.n_outcomes):
        e = np.zeros(space.n_outcomes)
        e[i] = 1.0
        basis.append(ProcessPaths.from_terminal(space, e))
    return basis
