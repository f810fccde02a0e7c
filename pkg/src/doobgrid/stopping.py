"""Finite-valued approximation and certification of stopping times.

A stopping time whose indicator path is grid-predictable can be
approached from below: approximate the indicator by predictable step
processes, then stop at the left end of the first interval on which the
approximation exceeds one half.  Taking tail minima turns the family
into an increasing announcing sequence, and announced stopping times
are fair: stopping them costs every martingale nothing in expectation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .compensator import CompensatorApproximation, approximate_compensator
from .doob import is_grid_predictable
from .errors import EmptyList, NotAnnounceable, NotMartingale, NotPredictableInput
from .paths import (
    INF_IDX,
    GridStoppingTime,
    ProcessPaths,
    evaluate_at,
    martingale_defect,
)

_MART_TOL = 1e-12


def dyadic_stop_approx(
    tau: GridStoppingTime,
    levels: Sequence[int] | None = None,
    return_approximation: bool = False,
):
    """Finite-valued stopping times converging to tau from below.

    Runs the step-process approximation on the indicator 1_{[tau, 1]}
    and stops each level at (first level point s with value >= 1/2)
    minus one level step, capped into [0, 1].  Per outcome: the result
    is 0 where tau = 0, stays strictly below tau from some level on
    where tau > 0, and at the final (master) level equals the master
    grid predecessor of tau exactly.
    """
    space = tau.space
    indicator = tau.indicator()
    if not is_grid_predictable(indicator, space.grid.master_level):
        raise NotPredictableInput(
            "indicator of tau is not grid-predictable at the master level"
        )
    approx = approximate_compensator(indicator, levels)
    out = []
    for step in approx.steps:
        stride = space.grid.level_stride(step.level)
        hit = step.step_values >= 0.5  # (2**level, m)
        any_hit = hit.any(axis=0)
        first = hit.argmax(axis=0)  # j-1 for the first s = j / 2**level
        idx = np.where(
            step.b0 >= 0.5,
            0,
            np.where(any_hit, first * stride, space.grid.num_steps),
        ).astype(np.int64)
        out.append(GridStoppingTime(space, idx))
    if return_approximation:
        return out, approx
    return out


def announcing_sequence(
    sigmas: Sequence[GridStoppingTime],
) -> list[GridStoppingTime]:
    """Tail minima of a finite family of stopping times.

    Member n is the pointwise minimum over members n..end, so the output
    increases pointwise, never exceeds its input member, and its
    indicator is the pointwise maximum of the tail's indicators (the
    attained-infimum identity).
    """
    sigmas = list(sigmas)
    if not sigmas:
        raise EmptyList("announcing_sequence requires at least one member")
    space = sigmas[0].space
    stack = np.stack([s.idx for s in sigmas], axis=0)
    tail_min = np.minimum.accumulate(stack[::-1], axis=0)[::-1]
    return [GridStoppingTime(space, row) for row in tail_min]


def fairness_defect(
    tau: GridStoppingTime, martingales: Sequence[ProcessPaths]
) -> float:
    """max over the family of |E[M_tau] - E[M_{tau-}]|.

    Values at the infinite sentinel use the terminal row for both the
    stopped value and the left limit.  Inputs must be exact martingales.
    """
    worst = 0.0
    for M in martingales:
        if martingale_defect(M) > _MART_TOL:
            raise NotMartingale("fairness_defect requires exact martingales")
        stopped = M.space.expectation(evaluate_at(M, tau))
        before = M.space.expectation(evaluate_at(M, tau, left_limit=True))
        worst = max(worst, abs(stopped - before))
    return worst


def fairness_basis_defect(tau: GridStoppingTime) -> float:
    """Max of |E[M_tau] - E[M_{tau-}]| over the indicator-closed
    martingales, in closed form.

    The stopped expectation of the martingale closed by an outcome
    indicator is a weighted block-mass ratio, so the whole family is
    swept in O(grid * outcomes) without materializing the martingales;
    agrees with :func:`fairness_defect` over
    :func:`doobgrid.paths.martingale_basis`.
    """
    space = tau.space
    K = space.grid.num_steps
    m = space.n_outcomes
    idx_plus = np.minimum(tau.idx, K)
    idx_minus = np.where(tau.idx == INF_IDX, K, np.maximum(tau.idx - 1, 0))
    d = np.zeros(m)
    for sign, eff in ((1.0, idx_plus), (-1.0, idx_minus)):
        for k in np.unique(eff):
            sel = eff == k
            lab = space.labels[int(k)]
            nb = int(lab.max()) + 1
            acc = np.bincount(lab[sel], weights=space.prob[sel], minlength=nb)
            pblock = np.bincount(lab, weights=space.prob, minlength=nb)
            d += sign * (acc / pblock)[lab] * space.prob
    return float(np.max(np.abs(d)))


@dataclass
class StoppingClassification:
    is_stopping: bool
    is_grid_predictable: bool
    stopping_failures: list[int]
    predictable_failures: list[int]


def classify_stopping_time(tau: GridStoppingTime) -> StoppingClassification:
    """Certify the stopping and grid-predictability properties of tau.

    tau is a stopping time iff {tau <= t_k} is a union of time-t_k
    blocks for every k; it is grid-predictable iff its indicator path is
    a master-level predictable step process, i.e. {tau <= t_k} is
    decidable one step earlier and {tau = 0} at time 0.
    """
    space = tau.space
    stop_fail = []
    pred_fail = []
    for k in range(space.grid.num_points):
        hit = (tau.idx <= k).astype(float)
        if not space.is_measurable(hit, k):
            stop_fail.append(k)
        if not space.is_measurable(hit, max(k - 1, 0)):
            pred_fail.append(k)
    return StoppingClassification(
        is_stopping=not stop_fail,
        is_grid_predictable=not pred_fail,
        stopping_failures=stop_fail,
        predictable_failures=pred_fail,
    )


def verify_announcing(
    tau: GridStoppingTime, members: Sequence[GridStoppingTime]
) -> None:
    """Validate an announcing certificate for tau; raises NotAnnounceable.

    Members must be stopping times increasing pointwise, vanish on
    {tau = 0}, stay strictly below tau where 0 < tau < infinity, and the
    final member must reach the master-grid predecessor of tau (the
    terminal index where tau is infinite).
    """
    members = list(members)
    if not members:
        raise NotAnnounceable("empty announcing sequence")
    space = tau.space
    K = space.grid.num_steps
    prev = None
    for n, s in enumerate(members):
        if not s.is_stopping_time():
            raise NotAnnounceable(f"member {n} is not a stopping time")
        if prev is not None and np.any(s.idx < prev):
            raise NotAnnounceable(f"member {n} decreases somewhere")
        prev = s.idx
        zero = tau.idx == 0
        if np.any(s.idx[zero] != 0):
            raise NotAnnounceable(f"member {n} is nonzero on {{tau = 0}}")
        below = (tau.idx > 0)
        finite = tau.idx != INF_IDX
        if np.any(s.idx[below & finite] >= tau.idx[below & finite]):
            raise NotAnnounceable(f"member {n} reaches tau on {{tau > 0}}")
        if np.any(s.idx[~finite] > K):
            raise NotAnnounceable(f"member {n} exceeds the horizon")
    last = members[-1].idx
    finite_pos = (tau.idx > 0) & (tau.idx != INF_IDX)
    if np.any(last[finite_pos] != tau.idx[finite_pos] - 1):
        raise NotAnnounceable(
            "final member must equal the master-grid predecessor of tau"
        )
    if np.any(last[tau.idx == INF_IDX] != K):
        raise NotAnnounceable(
            "final member must sit at the horizon where tau is infinite"
        )
