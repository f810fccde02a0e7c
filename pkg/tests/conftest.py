"""Shared fixtures, seeded generators and independent oracles."""
from __future__ import annotations

import numpy as np
import pytest

from doobgrid import DyadicGrid, FilteredSpace, ProcessPaths, build_filtered_space

# -- acceptance summary -------------------------------------------------

ACCEPTANCE_RESULTS: list[tuple[str, bool]] = []


def record_acceptance(name: str, ok: bool) -> None:
    ACCEPTANCE_RESULTS.append((name, ok))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for name, ok in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")


# -- fixtures ------------------------------------------------------------


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def space2() -> FilteredSpace:
    """Two outcomes u/d with equal weights, trivial then discrete filtration."""
    grid = DyadicGrid(1)
    return build_filtered_space(
        grid,
        [0.5, 0.5],
        [[["u", "d"]], [["u"], ["d"]], [["u"], ["d"]]],
        outcomes=["u", "d"],
        space_id="SPACE-2",
    )


def one_outcome_space(level: int) -> FilteredSpace:
    grid = DyadicGrid(level)
    return build_filtered_space(
        grid, [1.0], [[[0]]] * grid.num_points, space_id=f"det{level}"
    )


@pytest.fixture
def det4() -> FilteredSpace:
    return one_outcome_space(4)


def indicator_paths(space: FilteredSpace, u_process: bool = True) -> ProcessPaths:
    """The SPACE-2 staple S = 1_u on [1/2, 1]."""
    return ProcessPaths(space, [[0, 0], [1, 0], [1, 0]])


# -- independent oracle: decomposition equations as a linear solve --------


def brute_force_decomposition(
    space: FilteredSpace, S: ProcessPaths, level: int
) -> tuple[np.ndarray, bool]:
    """Solve the decomposition equations blindly via least squares.

    Unknowns are the trend values per subgrid step and per block of the
    previous subgrid time's partition (the measurability constraint);
    each equation states that one conditional one-step increment of
    S - A vanishes on one block.  Returns the trend sampled on the
    subgrid and whether the solution was unique (full rank).
    """
    stride = space.grid.level_stride(level)
    steps = 1 << level
    sub = S.values[::stride]
    prob = space.prob
    var_of: dict[tuple[int, int], int] = {}
    nvar = 0
    for j in range(1, steps + 1):
        lab = space.labels[(j - 1) * stride]
        for b in range(int(lab.max()) + 1):
            var_of[(j, b)] = nvar
            nvar += 1
    rows, rhs = [], []
    for j in range(1, steps + 1):
        lab_prev = space.labels[(j - 1) * stride]
        for b in range(int(lab_prev.max()) + 1):
            members = np.flatnonzero(lab_prev == b)
            row = np.zeros(nvar)
            row[var_of[(j, b)]] -= prob[members].sum()
            if j >= 2:
                lab_pp = space.labels[(j - 2) * stride]
                for w in members:
                    row[var_of[(j - 1, int(lab_pp[w]))]] += prob[w]
            rows.append(row)
            rhs.append(-float(prob[members] @ (sub[j][members] - sub[j - 1][members])))
    mat = np.array(rows)
    sol, _, rank, _ = np.linalg.lstsq(mat, np.array(rhs), rcond=None)
    A = np.zeros_like(sub)
    for j in range(1, steps + 1):
        lab_prev = space.labels[(j - 1) * stride]
        A[j] = np.array([sol[var_of[(j, int(lab_prev[w]))]] for w in range(space.n_outcomes)])
    return A, rank == nvar
