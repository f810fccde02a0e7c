"""Discrete Doob decomposition along dyadic subgrids.

Sampling an adapted process on the level-n subgrid and accumulating the
one-step conditional-expectation increments yields the unique
decomposition S = M + A with A grid-predictable, A_0 = 0 and M a
martingale along the subgrid.  The decomposition extends to the master
grid by closing M with its terminal value and by holding A constant on
the half-open level-n intervals.
"""
from __future__ import annotations

import numpy as np

from .errors import LevelTooHigh, NotAdapted
from .paths import ProcessPaths
from .space import TOL, FilteredSpace


class DyadicStepProcess:
    """Level-n predictable step process.

    Holds the value ``b0`` at time 0 and one random value per level-n
    point ``s = j / 2**n`` (j >= 1), constant on ``(s - 2**-n, s]``.
    Each value must be measurable at the left end of its interval.
    """

    __slots__ = ("space", "level", "b0", "step_values")

    def __init__(
        self,
        space: FilteredSpace,
        level: int,
        b0: np.ndarray,
        step_values: np.ndarray,
    ) -> None:
        stride = space.grid.level_stride(level)  # validates the level
        b0 = np.array(b0, dtype=float)
        step_values = np.array(step_values, dtype=float)
        if b0.shape != (space.n_outcomes,):
            raise ValueError("b0 must hold one value per outcome")
        if step_values.shape != (1 << level, space.n_outcomes):
            raise ValueError(
                f"step_values must have shape {(1 << level, space.n_outcomes)}"
            )
        if not space.is_measurable(b0, 0):
            raise NotAdapted("step value at 0 must be measurable at time 0")
        for j in range(1, (1 << level) + 1):
            if not space.is_measurable(step_values[j - 1], (j - 1) * stride):
                raise NotAdapted(
                    f"step value on interval ending at {j}/2^{level} is not"
                    " measurable at the interval's left end"
                )
        b0.setflags(write=False)
        step_values.setflags(write=False)
        self.space = space
        self.level = level
        self.b0 = b0
        self.step_values = step_values

    def expand(self) -> ProcessPaths:
        """Master-grid path: value b0 at {0}, step value on each interval."""
        space = self.space
        stride = space.grid.level_stride(self.level)
        K = space.grid.num_steps
        rows = np.empty((K + 1, space.n_outcomes))
        rows[0] = self.b0
        ks = np.arange(1, K + 1)
        rows[1:] = self.step_values[(ks + stride - 1) // stride - 1]
        return ProcessPaths(space, rows)

    def terminal(self) -> np.ndarray:
        return self.step_values[-1]

    def __repr__(self) -> str:
        return f"DyadicStepProcess(level={self.level}, space={self.space.space_id!r})"


class DoobDecomposition:
    """S|_{D_n} = M + A with A predictable along the subgrid and A_0 = 0."""

    __slots__ = ("space", "level", "martingale", "compensator")

    def __init__(self, space, level, martingale, compensator) -> None:
        self.space = space
        self.level = level
        self.martingale = np.asarray(martingale, dtype=float)
        self.compensator = np.asarray(compensator, dtype=float)


def discrete_doob(S: ProcessPaths, n: int) -> DoobDecomposition:
    """Doob decomposition of S sampled on the level-n subgrid.

    ``A_{k/2^n} = sum_{j<=k} E[S_{j/2^n} - S_{(j-1)/2^n} | F_{(j-1)/2^n}]``
    and ``M = S - A`` on the subgrid.  If S is a submartingale along the
    subgrid, A is increasing.
    """
    space = S.space
    if n > space.grid.master_level:
        raise LevelTooHigh(f"level {n} exceeds master level")
    if not S.is_adapted:
        raise NotAdapted("discrete_doob requires an adapted process")
    stride = space.grid.level_stride(n)
    sub = S.values[::stride]
    steps = 1 << n
    A = np.zeros_like(sub)
    for j in range(1, steps + 1):
        inc = sub[j] - sub[j - 1]
        A[j] = A[j - 1] + space.conditional_expectation(inc, (j - 1) * stride)
    return DoobDecomposition(space, n, sub - A, A)


def extend_doob(dd: DoobDecomposition) -> tuple[ProcessPaths, DyadicStepProcess]:
    """Extend a subgrid decomposition to the master grid.

    The martingale part is closed by its terminal value, giving a
    master-grid martingale that agrees with M on the subgrid; the trend
    part becomes the step process holding each subgrid value on the
    half-open interval to its left.
    """
    space = dd.space
    Mext = ProcessPaths.from_terminal(space, dd.martingale[-1])
    Aext = DyadicStepProcess(space, dd.level, dd.compensator[0], dd.compensator[1:])
    return Mext, Aext


def is_grid_predictable(P: ProcessPaths, n: int, tol: float = TOL) -> bool:
    """True iff P is a level-n predictable step process.

    Checks constancy on each interval ``(s - 2**-n, s]`` at master
    resolution, measurability of the interval value at the interval's
    left end, and measurability of P_0 at time 0.
    """
    space = P.space
    stride = space.grid.level_stride(n)
    if not space.is_measurable(P.values[0], 0, tol):
        return False
    for j in range(1, (1 << n) + 1):
        lo, hi = (j - 1) * stride, j * stride
        block = P.values[lo + 1 : hi + 1]
        if np.max(np.abs(block - block[-1])) > tol:
            return False
        if not space.is_measurable(block[-1], lo, tol):
            return False
    return True
