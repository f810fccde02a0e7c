from fractions import Fraction

import numpy as np
import pytest

import doobgrid as dg
from conftest import brute_force_decomposition, make_rng, one_outcome_space
from doobgrid.errors import (
    HypothesisViolated,
    NoAccumulationPoint,
    NotAdapted,
    NotFiniteVariation,
    NotSubmartingale,
)
from doobgrid.generators import (
    random_filtered_space,
    random_increasing_adapted,
    random_martingale,
    random_submartingale,
)


def one_point_space():
    return one_outcome_space(1)


# -- forward convex combinations ------------------------------------------


def test_fcc_constant_sequence():
    space = one_point_space()
    x = np.array([2.5])
    out = dg.forward_convex_combinations(space, [x] * 5)
    assert np.array_equal(out.limit, x)
    assert out.cauchy_passed
    assert out.weights[0].weights.sum() == 1.0
    assert out.reported_index == 0


def test_fcc_alternating_selects_even_indices():
    space = one_point_space()
    seq = [np.array([(-1.0) ** n]) for n in range(1, 11)]
    out = dg.forward_convex_combinations(space, seq)
    assert not out.cauchy_passed
    assert out.indices == [2, 4, 6, 8, 10]
    assert out.limit[0] == 1.0
    # forward support: combination n uses indices >= n
    for w in out.weights:
        assert w.end >= w.start


def test_fcc_harmonic_tail():
    space = one_point_space()
    seq = [np.array([1.0 / n]) for n in range(1, 7)]
    out = dg.forward_convex_combinations(space, seq)
    assert out.cauchy_passed
    assert out.limit[0] == pytest.approx(1.0 / 6.0)
    assert abs(out.limit[0]) < 0.2
    assert out.reported_index <= len(seq)


def test_fcc_guards():
    space = one_point_space()
    with pytest.raises(NoAccumulationPoint):
        dg.forward_convex_combinations(space, [np.array([np.nan])])
    with pytest.raises(ValueError):
        dg.forward_convex_combinations(space, [])


def test_convex_weights_validation():
    with pytest.raises(ValueError):
        dg.ConvexWeights(2, 1, np.array([1.0]))
    with pytest.raises(ValueError):
        dg.ConvexWeights(1, 2, np.array([0.5, 0.6]))
    w = dg.ConvexWeights.singleton(2, 5)
    assert w.start == 2 and w.end == 5
    assert w.weights[-1] == 1.0 and w.weights.sum() == 1.0


# -- dominated subsequence --------------------------------------------------


def test_dominated_identity_inputs():
    rng = make_rng(3)
    space = random_filtered_space(rng, max_outcomes=8, master_level=2)
    f = np.abs(rng.normal(size=space.n_outcomes))
    g = f + 1.0
    idx, h = dg.select_dominated_subsequence(space, f, g, [f] * 6, [g] * 6)
    assert idx == [1, 2, 3, 4, 5, 6]
    assert np.array_equal(h, g)


def test_dominated_shrinking_tail_selected():
    rng = make_rng(5)
    space = random_filtered_space(rng, max_outcomes=8, master_level=2)
    f = np.abs(rng.normal(size=space.n_outcomes)) + 0.1
    g = f + 1.0
    L = 128
    fseq = [f * (1 - 1.0 / n) for n in range(1, L + 1)]
    idx, h = dg.select_dominated_subsequence(space, f, g, fseq, [g] * L)
    assert idx == list(range(1, L + 1))  # full tail: errors decrease monotonically
    for i in idx:
        assert np.all(fseq[i - 1] <= h + 1e-12)
    errs = [np.max(np.abs(fseq[i - 1] - f)) for i in idx]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_dominated_zero_sequence():
    rng = make_rng(7)
    space = random_filtered_space(rng, max_outcomes=4, master_level=2)
    z = np.zeros(space.n_outcomes)
    g = np.ones(space.n_outcomes)
    idx, h = dg.select_dominated_subsequence(space, z, g, [z] * 4, [g] * 4)
    assert np.array_equal(h, g)


def test_dominated_hypothesis_violations():
    rng = make_rng(9)
    space = random_filtered_space(rng, max_outcomes=4, master_level=2)
    f = np.abs(rng.normal(size=space.n_outcomes)) + 0.5
    g = f + 1.0
    with pytest.raises(HypothesisViolated, match="domination"):
        dg.select_dominated_subsequence(space, f, g, [g + 1.0] * 4, [g] * 4)
    with pytest.raises(HypothesisViolated, match="g\\^n"):
        dg.select_dominated_subsequence(space, f, g, [f] * 4, [g + 1.0] * 4)
    with pytest.raises(HypothesisViolated, match="E\\[f\\^n\\]"):
        dg.select_dominated_subsequence(space, f + 0.5, g + 0.5, [f] * 4, [g + 0.5] * 4)
    with pytest.raises(HypothesisViolated, match="tail sups"):
        fseq = [np.where(np.arange(space.n_outcomes) == 0, f + 0.9, f) for _ in range(4)]
        balanced = [fn - space.expectation(fn) + space.expectation(f) for fn in fseq]
        dg.select_dominated_subsequence(space, f, g + 2.0, balanced, [g + 2.0] * 4)


# -- the approximation pipeline ---------------------------------------------


def test_zero_input_gives_zero_family():
    space = one_outcome_space(3)
    A = dg.ProcessPaths.constant(space, 0.0)
    out = dg.approximate_compensator(A)
    assert all(np.max(np.abs(s.expand().values)) == 0 for s in out.steps)
    assert np.max(out.dominating) == 0.0


def test_grid_identity_right_endpoint_rounding():
    space = one_outcome_space(3)
    ident = dg.ProcessPaths.deterministic(space, space.grid.float_times())
    out = dg.approximate_compensator(ident)
    for lvl, step in zip(out.levels, out.steps):
        vals = step.expand().values.ravel()
        times = space.grid.float_times()
        stride = space.grid.level_stride(lvl)
        expected = np.ceil(np.arange(len(times)) / stride) / (1 << lvl)
        assert np.allclose(vals, expected, atol=1e-12)
        assert np.max(np.abs(vals - times)) <= 2.0**-lvl + 1e-12


def test_deterministic_jump_family(det4):
    j = det4.grid.index_of(Fraction(1, 2))
    vals = np.zeros((det4.grid.num_points, 1))
    vals[j:] = 1.0
    A = dg.ProcessPaths(det4, vals)
    out = dg.approximate_compensator(A)
    assert out.levels == [1, 2, 3, 4]
    for lvl, step in zip(out.levels, out.steps):
        expanded = step.expand().values.ravel()
        grid_t = det4.grid.float_times()
        expected = (grid_t > 0.5 - 2.0**-lvl).astype(float)
        expected[0] = 0.0
        assert np.array_equal(expanded, expected)
    # pointwise errors vanish eventually at every fixed probe time
    for col in range(out.per_time_error.shape[1]):
        assert out.per_time_error[-1, col] <= 1e-12
        nz = np.nonzero(out.per_time_error[:, col] > 1e-12)[0]
        assert nz.size < out.per_time_error.shape[0]


def test_pipeline_invariants_random():
    rng = make_rng(101)
    for _ in range(30):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        increasing = bool(rng.integers(0, 2))
        if increasing:
            A = random_increasing_adapted(rng, space, predictable=True)
        else:
            up = random_increasing_adapted(rng, space, predictable=True)
            down = random_increasing_adapted(rng, space, predictable=True)
            A = dg.ProcessPaths(space, up.values - down.values)
        shift = float(rng.normal())
        A = dg.ProcessPaths(space, A.values + shift)  # arbitrary start value
        out = dg.approximate_compensator(A)
        assert out.levels[-1] == space.grid.master_level
        for step in out.steps:
            assert np.allclose(step.b0, A.values[0], atol=1e-12)
            expanded = step.expand()
            var_total = np.sum(np.abs(np.diff(expanded.values, axis=0)), axis=0)
            assert np.all(var_total <= out.dominating + 1e-10)
            if increasing:
                assert np.min(np.diff(expanded.values, axis=0)) >= -1e-12
        # top-level exactness for grid-predictable inputs
        assert out.report_vs_input[-1].max_abs_error <= 1e-10


def test_pipeline_rejects_bad_inputs(space2):
    bad = dg.ProcessPaths(space2, [[1, 0], [1, 0], [1, 0]])
    with pytest.raises(NotAdapted):
        dg.approximate_compensator(bad)
    nan = dg.ProcessPaths(space2, [[0, 0], [np.nan, 0], [0, 0]])
    with pytest.raises((NotFiniteVariation, NotAdapted)):
        dg.approximate_compensator(nan)


def test_exact_compensator_examples(space2):
    S = dg.ProcessPaths(space2, [[0, 0], [1, 0], [1, 0]])
    A = dg.exact_compensator(S)
    assert np.allclose(A.values, [[0, 0], [0.5, 0.5], [0.5, 0.5]])
    M = dg.ProcessPaths.from_terminal(space2, np.array([1.0, -2.0]))
    assert np.max(np.abs(dg.exact_compensator(M).values)) <= 1e-12
    space = one_outcome_space(2)
    S2 = dg.ProcessPaths.deterministic(space, [1, 1, 2, 4, 4])
    assert np.allclose(
        dg.exact_compensator(S2).values.ravel(), [0, 0, 1, 3, 3]
    )
    down = dg.ProcessPaths.deterministic(space, [1, 0, 0, 0, 0])
    with pytest.raises(NotSubmartingale):
        dg.exact_compensator(down)


def test_exact_compensator_matches_brute_force():
    rng = make_rng(103)
    for _ in range(25):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        S = random_submartingale(rng, space)
        A = dg.exact_compensator(S)
        oracle, unique = brute_force_decomposition(space, S, space.grid.master_level)
        assert unique
        assert np.allclose(A.values, oracle, atol=1e-8)
        assert dg.is_grid_predictable(A, space.grid.master_level)
        assert np.min(np.diff(A.values, axis=0)) >= -1e-12
        M = dg.ProcessPaths(space, S.values - A.values)
        assert dg.martingale_defect(M) <= 1e-10


def test_probe_stop_times_are_limit_jumps(det4):
    j = det4.grid.index_of(Fraction(1, 2))
    vals = np.zeros((det4.grid.num_points, 1))
    vals[j:] = 1.0
    out = dg.approximate_compensator(dg.ProcessPaths(det4, vals))
    assert len(out.probe_stop_times) == 1
    assert out.probe_stop_times[0].times() == [Fraction(1, 2)]
