from fractions import Fraction

import numpy as np
import pytest

import doobgrid as dg
from conftest import make_rng, one_outcome_space
from doobgrid.errors import (
    EmptyList,
    NotAnnounceable,
    NotMartingale,
    NotPredictableInput,
)
from doobgrid.generators import (
    random_filtered_space,
    random_grid_predictable_stopping_time,
    random_martingale,
)
from doobgrid.paths import INF_IDX


def test_dyadic_stop_approx_deterministic_half():
    for level in range(2, 6):
        space = one_outcome_space(level)
        tau = dg.GridStoppingTime.deterministic(space, Fraction(1, 2))
        sigmas = dg.dyadic_stop_approx(tau)
        assert len(sigmas) == level
        for n, sigma in enumerate(sigmas, start=1):
            assert sigma.times()[0] == Fraction(1, 2) - Fraction(1, 2**n)


def test_dyadic_stop_approx_zero_and_never():
    space = one_outcome_space(3)
    zero = dg.GridStoppingTime.deterministic(space, 0)
    for sigma in dg.dyadic_stop_approx(zero):
        assert sigma.times() == [0]
    never = dg.GridStoppingTime.never(space)
    for sigma in dg.dyadic_stop_approx(never):
        assert sigma.times() == [1]


def test_dyadic_stop_approx_two_outcome_example():
    # discrete information from 1/4 onward; tau = 1/2 on u, 1 on d
    grid = dg.DyadicGrid(2)
    parts = [[[0, 1]]] + [[[0], [1]]] * 4
    space = dg.build_filtered_space(grid, [0.5, 0.5], parts, outcomes=["u", "d"])
    tau = dg.GridStoppingTime(space, np.array([2, 4]))
    sigmas = dg.dyadic_stop_approx(tau)
    final = sigmas[-1]
    assert final.times() == [Fraction(1, 4), Fraction(3, 4)]


def test_dyadic_stop_approx_requires_predictable(space2):
    tau = dg.GridStoppingTime(space2, np.array([1, 2]))  # inaccessible
    with pytest.raises(NotPredictableInput):
        dg.dyadic_stop_approx(tau)


def test_dyadic_stop_approx_random_predictable_times():
    rng = make_rng(59)
    for _ in range(40):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        tau = random_grid_predictable_stopping_time(rng, space)
        sigmas = dg.dyadic_stop_approx(tau)
        final = sigmas[-1]
        finite_pos = (tau.idx > 0) & (tau.idx != INF_IDX)
        assert np.all(final.idx[finite_pos] == tau.idx[finite_pos] - 1)
        assert np.all(final.idx[tau.idx == 0] == 0)
        assert np.all(final.idx[tau.idx == INF_IDX] == space.grid.num_steps)
        for sigma in sigmas:
            assert sigma.is_stopping_time()
            assert np.all(sigma.idx[tau.idx == 0] == 0)
            assert len({int(v) for v in sigma.idx}) <= space.n_outcomes + 1
        # per outcome, sigma stays strictly below tau from some level on
        for i in np.flatnonzero(finite_pos):
            below = [s.idx[i] < tau.idx[i] for s in sigmas]
            n0 = len(below) - 1
            while n0 > 0 and below[n0 - 1]:
                n0 -= 1
            assert all(below[n0:])


def test_announcing_sequence_examples():
    space = one_outcome_space(4)
    sig = [
        dg.GridStoppingTime.deterministic(space, Fraction(1, 2) - Fraction(1, 2**n))
        for n in range(1, 5)
    ]
    ann = dg.announcing_sequence(sig)
    assert [a.times()[0] for a in ann] == [s.times()[0] for s in sig]
    zeros = [dg.GridStoppingTime.deterministic(space, 0)] * 3
    assert all(a.times() == [0] for a in dg.announcing_sequence(zeros))
    alternating = [
        dg.GridStoppingTime.deterministic(space, t)
        for t in [Fraction(1, 4), Fraction(3, 4), Fraction(1, 4), Fraction(3, 4)]
    ]
    ann = dg.announcing_sequence(alternating)
    assert [a.times()[0] for a in ann] == [
        Fraction(1, 4),
        Fraction(1, 4),
        Fraction(1, 4),
        Fraction(3, 4),
    ]
    with pytest.raises(EmptyList):
        dg.announcing_sequence([])


def test_announcing_indicator_identity():
    rng = make_rng(61)
    for _ in range(30):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        sigmas = [
            random_grid_predictable_stopping_time(rng, space) for _ in range(4)
        ]
        ann = dg.announcing_sequence(sigmas)
        for n, member in enumerate(ann):
            assert np.all(member.idx <= sigmas[n].idx)
            tail = np.stack([s.indicator().values for s in sigmas[n:]])
            assert np.array_equal(member.indicator().values, tail.max(axis=0))
        for a, b in zip(ann, ann[1:]):
            assert np.all(a.idx <= b.idx)


def test_fairness_examples(space2):
    M = dg.ProcessPaths(space2, [[0, 0], [1, -1], [1, -1]])
    det = dg.GridStoppingTime.deterministic(space2, Fraction(1, 2))
    assert dg.fairness_defect(det, [M]) <= 1e-15
    zero = dg.GridStoppingTime.deterministic(space2, 0)
    assert dg.fairness_defect(zero, [M]) == 0.0
    tau = dg.GridStoppingTime(space2, np.array([1, 2]))
    assert dg.fairness_defect(tau, [M]) == pytest.approx(0.5)
    bad = dg.ProcessPaths(space2, [[0, 0], [1, 0], [1, 0]])
    with pytest.raises(NotMartingale):
        dg.fairness_defect(tau, [bad])


def test_fairness_basis_matches_explicit_loop():
    rng = make_rng(67)
    for _ in range(30):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        tau = random_grid_predictable_stopping_time(rng, space)
        explicit = dg.fairness_defect(tau, dg.martingale_basis(space))
        assert dg.fairness_basis_defect(tau) == pytest.approx(explicit, abs=1e-12)


def test_deterministic_times_are_fair():
    rng = make_rng(71)
    for _ in range(20):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        k = int(rng.integers(0, space.grid.num_points))
        tau = dg.GridStoppingTime(
            space, np.full(space.n_outcomes, k, dtype=np.int64)
        )
        M = random_martingale(rng, space)
        assert dg.fairness_defect(tau, [M]) <= 1e-12


def test_classify_examples(space2):
    det = dg.GridStoppingTime.deterministic(space2, Fraction(1, 2))
    rep = dg.classify_stopping_time(det)
    assert rep.is_stopping and rep.is_grid_predictable
    tau = dg.GridStoppingTime(space2, np.array([1, 2]))
    rep = dg.classify_stopping_time(tau)
    assert rep.is_stopping and not rep.is_grid_predictable
    assert rep.predictable_failures == [1]
    never = dg.GridStoppingTime.never(space2)
    rep = dg.classify_stopping_time(never)
    assert rep.is_stopping and rep.is_grid_predictable


def test_verify_announcing_accepts_pipeline_output():
    rng = make_rng(73)
    for _ in range(20):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        tau = random_grid_predictable_stopping_time(rng, space)
        ann = dg.announcing_sequence(dg.dyadic_stop_approx(tau))
        dg.verify_announcing(tau, ann)


def test_verify_announcing_rejects_bad_certificates(space2):
    tau = dg.GridStoppingTime.deterministic(space2, Fraction(1, 2))
    with pytest.raises(NotAnnounceable):
        dg.verify_announcing(tau, [])
    at_tau = dg.GridStoppingTime.deterministic(space2, Fraction(1, 2))
    with pytest.raises(NotAnnounceable):
        dg.verify_announcing(tau, [at_tau])
    fine = one_outcome_space(2)
    tau_fine = dg.GridStoppingTime.deterministic(fine, Fraction(1, 2))
    short = dg.GridStoppingTime.deterministic(fine, 0)
    with pytest.raises(NotAnnounceable):  # never reaches the predecessor 1/4
        dg.verify_announcing(tau_fine, [short])
