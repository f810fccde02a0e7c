"""Built-in verification battery behind the `doobgrid selftest` command.

Runs scaled-down versions of every advertised guarantee and reports one
verdict row per check; any failing row makes the CLI exit nonzero.
"""
from __future__ import annotations

import time
from fractions import Fraction

import numpy as np

from .compensator import (
    approximate_compensator,
    exact_compensator,
    forward_convex_combinations,
    select_dominated_subsequence,
)
from .diagnostics import (
    compensator_continuity_defect,
    naturality_basis_defect,
    predictable_martingale_check,
    right_endpoint_identity_defect,
    special_decomposition,
)
from .doob import discrete_doob, extend_doob, is_grid_predictable
from .errors import HypothesisViolated
from .generators import (
    random_filtered_space,
    random_grid_predictable_stopping_time,
    random_increasing_adapted,
    random_martingale,
    random_submartingale,
)
from .hitting import IntervalUnion, exhaust_jumps
from .paths import (
    INF_IDX,
    GridStoppingTime,
    ProcessPaths,
    jump_process,
    martingale_defect,
    partition_sum,
)
from .scenarios import (
    ExperimentReport,
    ReportRow,
    ScenarioConfig,
    _verdict,
    generate_scenario,
    run_convergence_experiment,
)
from .stopping import announcing_sequence, dyadic_stop_approx, fairness_basis_defect


def _row(name: str, level: int, value: float, ok: bool, detail: str = "") -> ReportRow:
    return ReportRow(f"selftest:{name}", level, 0.0, float(value), float(value), _verdict(ok, detail))


def _check_doob(rng, rows, sweeps: int) -> None:
    worst = 0.0
    ok = True
    for _ in range(sweeps):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        S = random_submartingale(rng, space)
        dd = discrete_doob(S, space.grid.master_level)
        M = ProcessPaths(space, dd.martingale)
        A = ProcessPaths(space, dd.compensator)
        worst = max(worst, martingale_defect(M))
        ok = ok and np.max(np.abs(dd.compensator[0])) <= 1e-12
        ok = ok and is_grid_predictable(A, space.grid.master_level)
    rows.append(_row("doob-exactness", 3, worst, ok and worst <= 1e-10))


def _check_compensate(rows) -> None:
    worst = 0.0
    for kind, extra in (
        ("bernoulli_counting", {"p": 0.5}),
        ("deterministic_jump", {"jump_time": 0.5}),
        ("predictable_jump", {"jump_time": 0.5}),
        ("inaccessible_jump", {"jump_time": 0.5}),
        ("reflected_walk", {}),
    ):
        cfg = ScenarioConfig(kind=kind, master_level=3, **extra).validate()
        report = run_convergence_experiment(cfg, "compensate")
        worst = max(worst, max(r.max_abs_error for r in report.rows if r.level == 3))
        if not report.passed:
            rows.append(_row("compensate", 3, worst, False, kind))
            return
    rows.append(_row("compensate", 3, worst, worst <= 1e-10))


def _check_stop_approx(rng, rows, sweeps: int) -> None:
    space_ok = True
    cfg = ScenarioConfig(kind="deterministic_jump", master_level=4, jump_time=0.5)
    sc = generate_scenario(cfg.validate())
    sigmas = dyadic_stop_approx(sc.stopping_times["tau"])
    expected = [Fraction(1, 2) - Fraction(1, 2**n) for n in range(1, 5)]
    exact = len(sigmas) == 4 and all(
        s.times()[0] == e for s, e in zip(sigmas, expected)
    )
    for _ in range(sweeps):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        tau = random_grid_predictable_stopping_time(rng, space)
        sigmas = dyadic_stop_approx(tau)
        final = sigmas[-1]
        finite_pos = (tau.idx > 0) & (tau.idx != INF_IDX)
        space_ok = space_ok and bool(
            np.all(final.idx[finite_pos] == tau.idx[finite_pos] - 1)
        )
        space_ok = space_ok and bool(np.all(final.idx[tau.idx == 0] == 0))
        members = announcing_sequence(sigmas)
        fair = fairness_basis_defect(tau)
        space_ok = space_ok and fair <= 1e-10
        space_ok = space_ok and all(m.is_stopping_time() for m in members)
    rows.append(_row("stop-approx", 3, 0.0, exact and space_ok))


def _check_exhaust(rng, rows, sweeps: int) -> None:
    ok = True
    for _ in range(sweeps):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        X = random_increasing_adapted(rng, space)
        sizes = np.abs(jump_process(X).values)
        positive = sizes[sizes > 0]
        if not positive.size:
            continue
        for F in (
            IntervalUnion.absolute_at_least(float(positive.min())),
            IntervalUnion.positive_half_line(),
        ):
            members = exhaust_jumps(X, F)
            target = {
                (int(k), int(i))
                for k, i in zip(
                    *np.nonzero(F.contains_array(jump_process(X).values))
                )
                if k >= 1
            }
            seen: set = set()
            for s in members:
                g = s.graph()
                ok = ok and not (seen & g)
                seen |= g
            ok = ok and seen == target
    rows.append(_row("exhaust", 3, 0.0, ok))


def _check_natural(rng, rows, sweeps: int) -> None:
    ok = True
    for _ in range(sweeps):
        space = random_filtered_space(rng, max_outcomes=8, master_level=3)
        predictable = bool(rng.integers(0, 2))
        A = random_increasing_adapted(rng, space, predictable=predictable)
        defect = naturality_basis_defect(A)
        ok = ok and (defect <= 1e-10) == is_grid_predictable(
            A, space.grid.master_level
        )
        M = random_martingale(rng, space)
        ok = ok and right_endpoint_identity_defect(A, M) <= 1e-10
    rows.append(_row("natural-equivalence", 3, 0.0, ok))


def _check_partition_sums(rows) -> None:
    ok = True
    worst = 0.0
    for k in range(1, 11):
        pts = [Fraction(i, 2**k) for i in range(2**k + 1)]
        val = partition_sum(lambda t: t * t, lambda t: t, pts)
        n = 2**k
        ok = ok and val == float(Fraction((n - 1) * n * (2 * n - 1), 6 * n**3))
        gap = abs(val - 1.0 / 3.0)
        worst = max(worst, gap - 2.0**-k)
        ok = ok and gap <= 2.0**-k
    rows.append(_row("partition-sums", 10, worst, ok))


def _check_dominated(rng, rows, sweeps: int) -> None:
    ok = True
    for _ in range(sweeps):
        space = random_filtered_space(rng, max_outcomes=8, master_level=2)
        f = np.abs(rng.normal(size=space.n_outcomes)) + 0.1
        g = f + 1.0
        fseq = [f * (1 - 2.0**-n) for n in range(1, 9)]
        gseq = [g + rng.random(space.n_outcomes) * 2.0**-n for n in range(1, 9)]
        idx, h = select_dominated_subsequence(space, f, g, fseq, gseq)
        ok = ok and all(np.all(fseq[i - 1] <= h + 1e-12) for i in idx)
        floor = float(f.max()) * 2.0 ** -len(fseq)
        ok = ok and np.max(np.abs(fseq[idx[-1] - 1] - f)) <= 2.0 * floor
    try:
        select_dominated_subsequence(
            space, f, g, [f + 0.5] * 8, [g] * 8
        )
        ok = False
    except HypothesisViolated:
        pass
    rows.append(_row("dominated-subsequence", 2, 0.0, ok))


def _check_continuity(rows) -> None:
    ok = True
    cfg = ScenarioConfig(kind="bernoulli_counting", master_level=3, lam=0.8).validate()
    report = run_convergence_experiment(cfg, "continuity")
    ok = ok and report.passed
    jumps = [r.time for r in report.rows]
    for a, b in zip(jumps, jumps[1:]):
        ok = ok and abs(a / b - 2.0) <= 0.1
    sc = generate_scenario(
        ScenarioConfig(kind="predictable_jump", master_level=3, jump_time=0.5).validate()
    )
    rep = compensator_continuity_defect(sc.processes["S"], [sc.stopping_times["tau"]])
    ok = ok and rep.max_gap <= 1e-10
    rows.append(_row("continuity", 3, rep.max_gap, ok))


def _check_shadow(rng, rows, sweeps: int) -> None:
    ok = True
    for _ in range(sweeps):
        space = random_filtered_space(rng, max_outcomes=8, master_level=2)
        M = random_martingale(rng, space)
        ok = ok and predictable_martingale_check(M).shadow_holds
        const = ProcessPaths.constant(space, float(rng.normal()))
        rep = predictable_martingale_check(const)
        ok = ok and rep.is_martingale and rep.is_grid_predictable
        ok = ok and rep.max_abs_jump <= 1e-10
    rows.append(_row("predictable-martingale", 2, 0.0, ok))


def _check_convex(rng, rows) -> None:
    space = random_filtered_space(rng, max_outcomes=4, master_level=1)
    x = rng.normal(size=space.n_outcomes)
    fcc = forward_convex_combinations(space, [x] * 6)
    ok = np.array_equal(fcc.limit, x)
    alternating = [np.full(space.n_outcomes, (-1.0) ** n) for n in range(1, 11)]
    fcc = forward_convex_combinations(space, alternating)
    ok = ok and np.all(fcc.limit == 1.0) and not fcc.cauchy_passed
    rows.append(_row("convex-combinations", 1, 0.0, ok))


def run_selftest(seed: int = 2024, sweeps: int = 25) -> ExperimentReport:
    """Execute the battery; deterministic for a fixed seed."""
    rng = np.random.Generator(np.random.Philox(seed))
    rows: list[ReportRow] = []
    started = time.perf_counter()
    _check_doob(rng, rows, sweeps)
    _check_compensate(rows)
    _check_stop_approx(rng, rows, max(sweeps // 2, 5))
    _check_exhaust(rng, rows, sweeps)
    _check_natural(rng, rows, sweeps)
    _check_partition_sums(rows)
    _check_dominated(rng, rows, max(sweeps // 2, 5))
    _check_continuity(rows)
    _check_shadow(rng, rows, max(sweeps // 2, 5))
    _check_convex(rng, rows)
    report = ExperimentReport(rows, {"selftest": True, "sweeps": sweeps}, seed)
    report.runtimes["selftest"] = time.perf_counter() - started
    report.sort()
    return report
