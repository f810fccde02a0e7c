"""Seeded random inputs for sweeps and the self-test battery.

All generators take a numpy Generator (a counter-based Philox stream in
the CLI) so identical seeds reproduce identical inputs bit for bit.
"""
from __future__ import annotations

import numpy as np

from .dyadic import DyadicGrid
from .paths import INF_IDX, GridStoppingTime, OptionalPartition, ProcessPaths
from .space import FilteredSpace


def random_filtered_space(
    rng: np.random.Generator,
    max_outcomes: int = 16,
    master_level: int = 3,
    space_id: str = "random",
) -> FilteredSpace:
    grid = DyadicGrid(master_level)
    m = int(rng.integers(2, max_outcomes + 1))
    w = rng.random(m) + 0.05
    w = w / w.sum()
    K = grid.num_steps
    labels = np.zeros((K + 1, m), dtype=np.int64)
    if rng.random() < 0.7:
        labels[K] = np.arange(m)
    else:
        labels[K] = rng.integers(0, m, size=m)
    for k in range(K - 1, -1, -1):
        nb = int(labels[k + 1].max()) + 1
        target = int(rng.integers(1, nb + 1))
        group = rng.integers(0, target, size=nb)
        labels[k] = group[labels[k + 1]]
    return FilteredSpace(grid, w, labels, space_id=space_id)


def random_adapted_process(
    rng: np.random.Generator, space: FilteredSpace, scale: float = 1.0
) -> ProcessPaths:
    rows = []
    for k in range(space.grid.num_points):
        lab = space.labels[k]
        vals = rng.normal(scale=scale, size=int(lab.max()) + 1)
        rows.append(vals[lab])
    return ProcessPaths(space, np.vstack(rows))


def random_martingale(rng: np.random.Generator, space: FilteredSpace) -> ProcessPaths:
    return ProcessPaths.from_terminal(space, rng.normal(size=space.n_outcomes))


def random_increasing_adapted(
    rng: np.random.Generator, space: FilteredSpace, predictable: bool = False
) -> ProcessPaths:
    """Increasing adapted process starting at 0; optionally grid-predictable
    (each increment decided one step earlier)."""
    K = space.grid.num_steps
    rows = [np.zeros(space.n_outcomes)]
    for k in range(1, K + 1):
        lab = space.labels[k - 1 if predictable else k]
        inc = rng.random(int(lab.max()) + 1)
        rows.append(rows[-1] + inc[lab])
    return ProcessPaths(space, np.vstack(rows))


def random_submartingale(rng: np.random.Generator, space: FilteredSpace) -> ProcessPaths:
    M = random_martingale(rng, space)
    A = random_increasing_adapted(rng, space, predictable=bool(rng.integers(0, 2)))
    return ProcessPaths(space, M.values + A.values)


def _random_hazard_time(
    rng: np.random.Generator, space: FilteredSpace, lag: int, stop_prob: float
) -> GridStoppingTime:
    """Stop each still-alive measurable block with probability stop_prob;
    lag 1 decides one step early (grid-predictable), lag 0 at the time."""
    K = space.grid.num_steps
    m = space.n_outcomes
    idx = np.full(m, INF_IDX, dtype=np.int64)
    if lag == 1 and rng.random() < 0.2:
        lab0 = space.labels[0]
        for b in range(int(lab0.max()) + 1):
            if rng.random() < stop_prob / 2:
                idx[lab0 == b] = 0
    for k in range(1, K + 1):
        lab = space.labels[max(k - lag, 0)]
        for b in range(int(lab.max()) + 1):
            members = (lab == b) & (idx == INF_IDX)
            if members.any() and rng.random() < stop_prob:
                idx[members] = k
    return GridStoppingTime(space, idx)


def random_grid_predictable_stopping_time(
    rng: np.random.Generator, space: FilteredSpace, stop_prob: float = 0.4
) -> GridStoppingTime:
    return _random_hazard_time(rng, space, lag=1, stop_prob=stop_prob)


def random_stopping_time(
    rng: np.random.Generator, space: FilteredSpace, stop_prob: float = 0.4
) -> GridStoppingTime:
    return _random_hazard_time(rng, space, lag=0, stop_prob=stop_prob)


def random_optional_partition(
    rng: np.random.Generator, space: FilteredSpace, length: int = 3
) -> OptionalPartition:
    """Order statistics of independent stopping times (again stopping times)."""
    stack = np.stack(
        [random_stopping_time(rng, space, stop_prob=0.5).idx for _ in range(length)]
    )
    stack.sort(axis=0)
    return OptionalPartition([GridStoppingTime(space, row) for row in stack])


def random_pi_predictable(
    rng: np.random.Generator, space: FilteredSpace, pi: OptionalPartition
) -> ProcessPaths:
    """Step process with values sampled on the partition, each measurable
    at the previous member's stopped partition."""
    K = space.grid.num_steps
    m = space.n_outcomes
    rows = np.zeros((K + 1, m))
    lab0 = space.labels[0]
    b0 = rng.normal(size=int(lab0.max()) + 1)[lab0]
    rows[0] = b0
    members = pi.members
    for n in range(1, len(members)):
        lab = space.stopped_labels(members[n - 1].idx)
        val = rng.normal(size=int(lab.max()) + 1)[lab]
        lo = members[n - 1].idx
        hi = members[n].idx
        for i in range(m):
            a, b = int(lo[i]), int(hi[i])
            a = min(a, K)
            b = min(b, K)
            if b > a:
                rows[a + 1 : b + 1, i] = val[i]
    return ProcessPaths(space, rows)
