"""Theorem-level checkers: naturality, continuity, special decompositions.

An increasing adapted process is natural when pairing it with any
bounded martingale through left-limit sums costs nothing in
expectation; on the grid this holds exactly if and only if the process
is grid-predictable.  The right-endpoint pairing, by contrast, vanishes
for every adapted increasing process, predictable or not.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .compensator import exact_compensator
from .doob import discrete_doob, is_grid_predictable
from .errors import (
    NotAdapted,
    NotDecomposable,
    NotIncreasing,
    NotMartingale,
)
from .hitting import localize_bounded
from .paths import (
    GridStoppingTime,
    OptionalPartition,
    ProcessPaths,
    jump_at,
    jump_process,
    martingale_defect,
    optional_partition_sum,
    stieltjes_left,
)
from .stopping import dyadic_stop_approx, announcing_sequence, verify_announcing
from .errors import NotAnnounceable, NotPredictableInput

_MART_TOL = 1e-12
_INC_TOL = 1e-12


def _require_martingale(M: ProcessPaths) -> None:
    if martingale_defect(M) > _MART_TOL:
        raise NotMartingale("input must be an exact martingale")


def _require_increasing_from_zero(A: ProcessPaths) -> None:
    if not A.is_adapted:
        raise NotAdapted("increasing input must be adapted")
    if np.max(np.abs(A.values[0])) > _INC_TOL:
        raise NotIncreasing("increasing input must start at 0")
    if np.min(np.diff(A.values, axis=0)) < -_INC_TOL:
        raise NotIncreasing("input must be increasing per outcome")


def naturality_defect_discrete(
    A: ProcessPaths, M: ProcessPaths, horizon: int | None = None
) -> float:
    """|E[M_n A_n] - E[sum_{k<=n} M_{k-1} (A_k - A_{k-1})]|."""
    _require_martingale(M)
    _require_increasing_from_zero(A)
    space = A.space
    n = space.grid.num_steps if horizon is None else int(horizon)
    space._check_index(n)
    left = space.expectation(M.values[n] * A.values[n])
    inc = np.diff(A.values[: n + 1], axis=0)
    right = space.expectation(np.sum(M.values[:n] * inc, axis=0))
    return abs(left - right)


def naturality_defect_continuous(A: ProcessPaths, M: ProcessPaths) -> float:
    """|E[M_1 A_1] - E[int of M left limits against dA]|.

    At grid resolution this coincides with the discrete form taken at
    the terminal horizon.
    """
    _require_martingale(M)
    _require_increasing_from_zero(A)
    space = A.space
    left = space.expectation(M.terminal * A.terminal)
    right = space.expectation(stieltjes_left(M, A))
    return abs(left - right)


def naturality_basis_defect(A: ProcessPaths, horizon: int | None = None) -> float:
    """Max discrete naturality defect over the indicator-closed martingales.

    For the martingale closed by a terminal value X the defect equals
    |E[X v]| with v the terminal martingale part of A at the horizon, so
    the maximum over outcome indicators is max_w p_w |v_w|.  This is the
    closed form of sweeping :func:`naturality_defect_discrete` over
    :func:`doobgrid.paths.martingale_basis` and runs in O(grid *
    outcomes).
    """
    _require_increasing_from_zero(A)
    space = A.space
    n = space.grid.num_steps if horizon is None else int(horizon)
    space._check_index(n)
    dd = discrete_doob(A, space.grid.master_level)
    v = A.values[n] - dd.compensator[n]
    return float(np.max(np.abs(space.prob * v)))


@dataclass
class NaturalityPartitionReport:
    direct_defect: float
    partition_defect: float
    agreement: float  # |direct - partition| evaluated on the same pairing


def naturality_partition_report(
    A: ProcessPaths, M: ProcessPaths, level: int | None = None
) -> NaturalityPartitionReport:
    """Left-limit pairing evaluated along a merged optional partition.

    The partition joins the level grid with the jump times of M, so the
    left-limit sum picks up every jump of M exactly; the report compares
    this form with the direct grid form.
    """
    from .hitting import IntervalUnion, exhaust_jumps
    from .paths import merge_optional_partitions

    _require_martingale(M)
    _require_increasing_from_zero(A)
    space = A.space
    n = space.grid.master_level if level is None else int(level)
    grid_part = OptionalPartition.deterministic(
        space, [space.grid.time_of(k) for k in space.grid.level_indices(n)]
    )
    jump_sizes = np.abs(jump_process(M).values)
    positive = jump_sizes[jump_sizes > 0]
    if positive.size:
        F = IntervalUnion.absolute_at_least(float(positive.min()))
        jumps = OptionalPartition(
            [s.clamp_to_horizon() for s in exhaust_jumps(M, F)]
        )
        merged = merge_optional_partitions(grid_part, jumps)
    else:
        merged = grid_part
    left = space.expectation(M.terminal * A.terminal)
    partition_right = space.expectation(optional_partition_sum(M, A, merged))
    direct = naturality_defect_continuous(A, M)
    return NaturalityPartitionReport(
        direct_defect=direct,
        partition_defect=abs(left - partition_right),
        agreement=abs(direct - abs(left - partition_right)),
    )


def right_endpoint_identity_defect(A: ProcessPaths, M: ProcessPaths) -> float:
    """|E[M_1 A_1] - E[sum_k M_k (A_k - A_{k-1})]|; zero for every
    adapted increasing A, predictability not required."""
    _require_martingale(M)
    _require_increasing_from_zero(A)
    space = A.space
    inc = np.diff(A.values, axis=0)
    right = space.expectation(np.sum(M.values[1:] * inc, axis=0))
    left = space.expectation(M.terminal * A.terminal)
    return abs(left - right)


@dataclass
class PredictableMartingaleReport:
    is_martingale: bool
    is_grid_predictable: bool
    max_abs_jump: float
    shadow_holds: bool


def predictable_martingale_check(M: ProcessPaths) -> PredictableMartingaleReport:
    """Report whether M is a martingale, grid-predictable, and its jumps.

    The discrete shadow of path continuity: a grid-predictable
    martingale is constant, so both flags force a zero maximal jump.
    """
    try:
        is_mart = martingale_defect(M) <= _MART_TOL
    except NotAdapted:
        is_mart = False
    is_pred = is_grid_predictable(M, M.space.grid.master_level)
    max_jump = float(np.max(np.abs(jump_process(M).values)))
    shadow = (not (is_mart and is_pred)) or max_jump <= 1e-10
    return PredictableMartingaleReport(is_mart, is_pred, max_jump, shadow)


@dataclass
class SpecialDecomposition:
    martingale: ProcessPaths
    compensator: ProcessPaths
    jump_sup: ProcessPaths
    localizers: list[GridStoppingTime]


def special_decomposition(S: ProcessPaths) -> SpecialDecomposition:
    """Canonical decomposition S = M + A on the master grid.

    A accumulates the one-step conditional drifts, so it is
    grid-predictable with A_0 = 0 and M = S - A is an exact martingale;
    on a finite grid this pair is unique.  Also returns the running
    supremum of |jump of S| and its threshold localizers, which certify
    local integrability at finite scale.
    """
    if not (S.is_adapted and np.all(np.isfinite(S.values))):
        raise NotDecomposable("decomposition requires a finite adapted process")
    dd = discrete_doob(S, S.space.grid.master_level)
    A = ProcessPaths(S.space, dd.compensator)
    M = ProcessPaths(S.space, S.values - dd.compensator)
    jump_abs = np.abs(jump_process(S).values)
    jump_sup = ProcessPaths(S.space, np.maximum.accumulate(jump_abs, axis=0))
    top = float(jump_sup.values.max())
    thresholds = list(range(1, int(np.floor(top)) + 2))
    return SpecialDecomposition(
        martingale=M,
        compensator=A,
        jump_sup=jump_sup,
        localizers=localize_bounded(jump_sup, thresholds),
    )


@dataclass
class ContinuityRow:
    jump_mean_s: float
    jump_mean_a: float
    gap: float


@dataclass
class ContinuityReport:
    rows: list[ContinuityRow]
    max_abs_compensator_jump: float
    max_gap: float
    localization_note: str = (
        "finite space: localizing integrability holds automatically"
    )


def compensator_continuity_defect(
    S: ProcessPaths,
    taus: Sequence[GridStoppingTime],
    announcers: Sequence[Sequence[GridStoppingTime]] | None = None,
) -> ContinuityReport:
    """Jump expectations of S and of its compensator at announced times.

    Each stopping time needs an announcing certificate; when none is
    passed one is built with :func:`dyadic_stop_approx`, and failure to
    build or validate one raises :class:`NotAnnounceable`.  For every
    certified time the expected jump of S equals the expected jump of
    the compensator; the maximal compensator jump is reported as the
    grid-scale continuity surrogate.
    """
    sd = special_decomposition(S)
    taus = list(taus)
    if announcers is None:
        announcers = []
        for tau in taus:
            try:
                announcers.append(announcing_sequence(dyadic_stop_approx(tau)))
            except NotPredictableInput as exc:
                raise NotAnnounceable(
                    "no announcing certificate: indicator is not grid-predictable"
                ) from exc
    if len(announcers) != len(taus):
        raise NotAnnounceable("one announcing sequence per stopping time required")
    rows = []
    for tau, seq in zip(taus, announcers):
        verify_announcing(tau, seq)
        es = S.space.expectation(jump_at(S, tau))
        ea = S.space.expectation(jump_at(sd.compensator, tau))
        rows.append(ContinuityRow(es, ea, abs(es - ea)))
    max_jump_a = float(np.max(np.abs(jump_process(sd.compensator).values)))
    max_gap = max((r.gap for r in rows), default=0.0)
    return ContinuityReport(rows, max_jump_a, max_gap)
