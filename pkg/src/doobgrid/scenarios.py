"""Scenario generation, experiment orchestration and report emission.

Scenarios are deterministic given their configuration: the driven kinds
(Bernoulli counting, jump scenarios, reflected walk) enumerate every
increment history as an outcome, so no sampling is involved and repeated
runs produce byte-identical reports.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .compensator import approximate_compensator, exact_compensator
from .diagnostics import (
    compensator_continuity_defect,
    naturality_basis_defect,
    special_decomposition,
)
from .doob import is_grid_predictable
from .dyadic import DyadicGrid, as_fraction
from .errors import BadConfig, DoobgridError, IoError, NotSubmartingale
from .hitting import IntervalUnion, exhaust_jumps
from .paths import INF_IDX, GridStoppingTime, ProcessPaths, jump_process
from .space import FilteredSpace, build_filtered_space
from .stopping import (
    classify_stopping_time,
    dyadic_stop_approx,
    fairness_basis_defect,
)

KINDS = (
    "bernoulli_counting",
    "deterministic_jump",
    "predictable_jump",
    "inaccessible_jump",
    "reflected_walk",
    "custom_tree",
)

MAX_MASTER_LEVEL = 12
MAX_ATOMS = 1 << 16


@dataclass
class ScenarioConfig:
    kind: str
    master_level: int
    seed: int = 0
    p: float | None = None
    lam: float | None = None
    jump_time: object | None = None
    tree: dict | None = None

    def validate(self) -> "ScenarioConfig":
        if self.kind not in KINDS:
            raise BadConfig(f"unknown scenario kind {self.kind!r}")
        if not isinstance(self.master_level, int) or not (
            1 <= self.master_level <= MAX_MASTER_LEVEL
        ):
            raise BadConfig("master_level must be an integer in 1..12")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise BadConfig("seed must be an unsigned 64-bit integer")
        if self.p is not None and not 0 < self.p < 1:
            raise BadConfig("p must lie in (0, 1)")
        if self.lam is not None and self.lam <= 0:
            raise BadConfig("lambda must be positive")
        if self.kind in ("bernoulli_counting", "reflected_walk"):
            steps = 1 << self.master_level
            if 1 << steps > MAX_ATOMS:
                raise BadConfig(
                    "increment scenarios need 2**(2**level) atoms;"
                    f" level {self.master_level} exceeds the 2**16 atom cap"
                )
            if self.kind == "bernoulli_counting" and self.p is None and self.lam is None:
                raise BadConfig("bernoulli_counting needs p or lambda")
        if self.kind in ("deterministic_jump", "predictable_jump", "inaccessible_jump"):
            if self.jump_time is None:
                raise BadConfig(f"{self.kind} needs jump_time")
            grid = DyadicGrid(self.master_level)
            try:
                j = grid.index_of(as_fraction(self.jump_time))
            except DoobgridError as exc:
                raise BadConfig(f"jump_time must be on the grid: {exc}") from exc
            if j == 0:
                raise BadConfig("jump_time must be positive")
        if self.kind == "custom_tree" and not isinstance(self.tree, dict):
            raise BadConfig("custom_tree needs a tree specification object")
        return self

    def effective_p(self) -> float:
        if self.p is not None:
            return float(self.p)
        p = float(self.lam) * 2.0**-self.master_level
        if not 0 < p < 1:
            raise BadConfig(f"lambda*2**-level = {p} is outside (0, 1)")
        return p

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "master_level": self.master_level, "seed": self.seed}
        if self.p is not None:
            out["p"] = float(self.p)
        if self.lam is not None:
            out["lam"] = float(self.lam)
        if self.jump_time is not None:
            out["jump_time"] = float(as_fraction(self.jump_time))
        if self.tree is not None:
            out["tree"] = self.tree
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ScenarioConfig":
        known = {"kind", "master_level", "seed", "p", "lam", "jump_time", "tree"}
        unknown = set(payload) - known
        if unknown:
            raise BadConfig(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(
                kind=payload["kind"],
                master_level=int(payload["master_level"]),
                seed=int(payload.get("seed", 0)),
                p=payload.get("p"),
                lam=payload.get("lam"),
                jump_time=payload.get("jump_time"),
                tree=payload.get("tree"),
            ).validate()
        except KeyError as exc:
            raise BadConfig(f"missing config field: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BadConfig(f"config is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise BadConfig("config must be a JSON object")
        return cls.from_dict(payload)


@dataclass
class Scenario:
    config: ScenarioConfig
    space: FilteredSpace
    processes: dict[str, ProcessPaths]
    stopping_times: dict[str, GridStoppingTime]


def _increment_space(level: int, p: float, space_id: str) -> tuple[FilteredSpace, np.ndarray]:
    """All increment histories of length 2**level as outcomes.

    Returns the space and the (steps+1, atoms) matrix of increment bits
    accumulated per grid index (the counting process).
    """
    grid = DyadicGrid(level)
    steps = grid.num_steps
    m = 1 << steps
    o = np.arange(m, dtype=np.int64)
    labels = np.stack([o >> (steps - k) for k in range(steps + 1)])
    counts = np.zeros((steps + 1, m))
    ones = np.zeros(m, dtype=np.int64)
    for k in range(1, steps + 1):
        bit = (o >> (steps - k)) & 1
        ones = ones + bit
        counts[k] = ones
    prob = p ** ones.astype(float) * (1 - p) ** (steps - ones).astype(float)
    space = FilteredSpace(grid, prob, labels, space_id=space_id)
    return space, counts


def _two_outcome_jump(cfg: ScenarioConfig, reveal_lag: int) -> Scenario:
    grid = DyadicGrid(cfg.master_level)
    j = grid.index_of(as_fraction(cfg.jump_time))
    p = cfg.p if cfg.p is not None else 0.5
    reveal = max(j - reveal_lag, 0)
    labels = np.zeros((grid.num_points, 2), dtype=np.int64)
    labels[reveal:, 1] = 1
    space = FilteredSpace(
        grid, [p, 1 - p], labels, outcomes=("jump", "stay"), space_id=cfg.kind
    )
    values = np.zeros((grid.num_points, 2))
    values[j:, 0] = 1.0
    S = ProcessPaths(space, values)
    tau = GridStoppingTime(space, np.array([j, INF_IDX], dtype=np.int64))
    A = exact_compensator(S)
    M = ProcessPaths(space, S.values - A.values)
    return Scenario(cfg, space, {"S": S, "A": A, "M": M}, {"tau": tau})


def generate_scenario(cfg: ScenarioConfig) -> Scenario:
    """Deterministically build the named space, processes and times."""
    cfg.validate()
    if cfg.kind == "bernoulli_counting":
        p = cfg.effective_p()
        space, counts = _increment_space(cfg.master_level, p, cfg.kind)
        N = ProcessPaths(space, counts)
        ks = np.arange(space.grid.num_points, dtype=float)
        A = ProcessPaths(space, np.broadcast_to((ks * p)[:, None], counts.shape))
        M = ProcessPaths(space, N.values - A.values)
        first = GridStoppingTime(
            space,
            np.where(counts[-1] > 0, np.argmax(counts > 0, axis=0), INF_IDX).astype(
                np.int64
            ),
        )
        return Scenario(
            cfg,
            space,
            {"S": N, "N": N, "A": A, "M": M},
            {"first_jump": first, "tau": first},
        )
    if cfg.kind == "deterministic_jump":
        grid = DyadicGrid(cfg.master_level)
        space = FilteredSpace(
            grid,
            [1.0],
            np.zeros((grid.num_points, 1), dtype=np.int64),
            outcomes=("w0",),
            space_id=cfg.kind,
        )
        j = grid.index_of(as_fraction(cfg.jump_time))
        values = np.zeros((grid.num_points, 1))
        values[j:] = 1.0
        S = ProcessPaths(space, values)
        tau = GridStoppingTime.deterministic(space, as_fraction(cfg.jump_time))
        return Scenario(cfg, space, {"S": S, "A": S}, {"tau": tau})
    if cfg.kind == "predictable_jump":
        return _two_outcome_jump(cfg, reveal_lag=1)
    if cfg.kind == "inaccessible_jump":
        return _two_outcome_jump(cfg, reveal_lag=0)
    if cfg.kind == "reflected_walk":
        p = cfg.p if cfg.p is not None else 0.5
        space, counts = _increment_space(cfg.master_level, p, cfg.kind)
        ks = np.arange(space.grid.num_points, dtype=float)[:, None]
        walk = 2.0 * counts - ks
        S = ProcessPaths(space, np.abs(walk))
        A = exact_compensator(S)
        M = ProcessPaths(space, S.values - A.values)
        return Scenario(cfg, space, {"S": S, "A": A, "M": M, "W": ProcessPaths(space, walk)}, {})
    # custom_tree
    tree = cfg.tree
    try:
        grid = DyadicGrid(cfg.master_level)
        space = build_filtered_space(
            grid,
            tree["weights"],
            tree["partitions"],
            outcomes=tree.get("outcomes"),
            space_id=tree.get("space_id", "custom"),
        )
        processes: dict[str, ProcessPaths] = {}
        if "process" in tree:
            S = ProcessPaths(space, np.asarray(tree["process"], dtype=float))
            processes["S"] = S
            try:
                processes["A"] = exact_compensator(S)
            except NotSubmartingale:
                processes["A"] = special_decomposition(S).compensator
            processes["M"] = ProcessPaths(
                space, S.values - processes["A"].values
            )
        stops: dict[str, GridStoppingTime] = {}
        if "tau" in tree:
            stops["tau"] = GridStoppingTime.from_times(space, tree["tau"])
        return Scenario(cfg, space, processes, stops)
    except BadConfig:
        raise
    except (DoobgridError, KeyError, ValueError, TypeError) as exc:
        raise BadConfig(f"invalid custom tree: {exc}") from exc


# ---------------------------------------------------------------------------
# experiment runner


@dataclass
class ReportRow:
    task: str
    level: int
    time: float
    max_abs_error: float
    mean_abs_error: float
    verdict: str


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    config: dict
    seed: int
    runtimes: dict[str, float] = field(default_factory=dict)

    def sort(self) -> None:
        self.rows.sort(key=lambda r: (r.task, r.level, r.time))

    @property
    def passed(self) -> bool:
        return all(r.verdict == "pass" for r in self.rows)


def _verdict(ok: bool, detail: str = "") -> str:
    return "pass" if ok else f"fail({detail})"


TASKS = ("compensate", "stop-approx", "exhaust", "natural", "fair", "continuity")


def run_convergence_experiment(cfg: ScenarioConfig, task: str) -> ExperimentReport:
    """Run one named pipeline across levels and aggregate verdicts.

    Row semantics per task are documented in the README; the CSV schema
    is fixed to (task, level, time, max_abs_error, mean_abs_error,
    verdict) for every task.
    """
    if task not in TASKS:
        raise BadConfig(f"unknown task {task!r}")
    started = time.perf_counter()
    scenario = generate_scenario(cfg)
    rows: list[ReportRow]
    if task == "compensate":
        rows = _task_compensate(scenario)
    elif task == "stop-approx":
        rows = _task_stop_approx(scenario)
    elif task == "exhaust":
        rows = _task_exhaust(scenario)
    elif task == "natural":
        rows = _task_natural(scenario)
    elif task == "fair":
        rows = _task_fair(scenario)
    else:
        rows = _task_continuity(cfg)
    report = ExperimentReport(rows, cfg.to_dict(), cfg.seed)
    report.runtimes[task] = time.perf_counter() - started
    report.sort()
    return report


def _require_process(sc: Scenario, name: str) -> ProcessPaths:
    if name not in sc.processes:
        raise BadConfig(f"scenario {sc.config.kind!r} provides no process {name!r}")
    return sc.processes[name]


def _require_tau(sc: Scenario) -> GridStoppingTime:
    if "tau" not in sc.stopping_times:
        raise BadConfig(
            f"scenario {sc.config.kind!r} provides no stopping time 'tau'"
        )
    return sc.stopping_times["tau"]


def _task_compensate(sc: Scenario) -> list[ReportRow]:
    A = _require_process(sc, "A")
    approx = approximate_compensator(A)
    increasing_input = bool(np.min(np.diff(A.values, axis=0)) >= -1e-12)
    rows = []
    for i, (lvl, step, row) in enumerate(
        zip(approx.levels, approx.steps, approx.report_vs_input)
    ):
        expanded = step.expand()
        checks = [
            (np.max(np.abs(step.b0 - A.values[0])) <= 1e-10, "start-value"),
            (
                np.all(
                    np.sum(np.abs(np.diff(expanded.values, axis=0)), axis=0)
                    <= approx.dominating + 1e-10
                ),
                "domination",
            ),
        ]
        if increasing_input:
            checks.append(
                (np.min(np.diff(expanded.values, axis=0)) >= -1e-12, "monotone")
            )
        if i == len(approx.steps) - 1 and lvl == A.space.grid.master_level:
            checks.append((row.max_abs_error <= 1e-10, "top-level-exactness"))
        bad = [name for ok, name in checks if not ok]
        rows.append(
            ReportRow(
                "compensate",
                lvl,
                row.time,
                row.max_abs_error,
                row.mean_abs_error,
                _verdict(not bad, ",".join(bad)),
            )
        )
    return rows


def _task_stop_approx(sc: Scenario) -> list[ReportRow]:
    tau = _require_tau(sc)
    sigmas, approx = dyadic_stop_approx(tau, return_approximation=True)
    space = tau.space
    horizon = tau.clamp_to_horizon().float_times()
    rows = []
    for i, (lvl, sigma) in enumerate(zip(approx.levels, sigmas)):
        gap = np.abs(horizon - sigma.float_times(inf_as=1.0))
        ok_zero = bool(np.all(sigma.idx[tau.idx == 0] == 0))
        checks = [(ok_zero, "zero-at-zero")]
        if i == len(sigmas) - 1 and lvl == space.grid.master_level:
            finite_pos = (tau.idx > 0) & (tau.idx != INF_IDX)
            checks.append(
                (
                    bool(np.all(sigma.idx[finite_pos] == tau.idx[finite_pos] - 1)),
                    "final-predecessor",
                )
            )
        bad = [name for ok, name in checks if not ok]
        rows.append(
            ReportRow(
                "stop-approx",
                lvl,
                float(space.expectation(sigma.float_times(inf_as=1.0))),
                float(gap.max()),
                float(space.prob @ gap),
                _verdict(not bad, ",".join(bad)),
            )
        )
    return rows


def _coverage_defects(X: ProcessPaths, F: IntervalUnion, members) -> tuple[int, int]:
    target = {
        (int(k), int(i))
        for k, i in zip(*np.nonzero(F.contains_array(jump_process(X).values)))
        if k >= 1
    }
    seen: set[tuple[int, int]] = set()
    overlaps = 0
    for s in members:
        g = s.graph()
        overlaps += len(seen & g)
        seen |= g
    return len(target.symmetric_difference(seen)), overlaps


def _task_exhaust(sc: Scenario) -> list[ReportRow]:
    S = _require_process(sc, "S")
    level = S.space.grid.master_level
    jumps = np.abs(jump_process(S).values)
    positive = jumps[jumps > 0]
    rows = []
    if positive.size:
        F = IntervalUnion.absolute_at_least(float(positive.min()))
    else:
        F = IntervalUnion.absolute_at_least(1.0)
    for name, target in (
        ("direct", F),
        ("annulus", IntervalUnion.positive_half_line()),
    ):
        members = exhaust_jumps(S, target)
        missing, overlaps = _coverage_defects(S, target, members)
        rows.append(
            ReportRow(
                f"exhaust:{name}",
                level,
                float(len(members)),
                float(missing),
                float(overlaps),
                _verdict(missing == 0 and overlaps == 0, "coverage"),
            )
        )
    return rows


def _task_natural(sc: Scenario) -> list[ReportRow]:
    A = _require_process(sc, "A")
    space = A.space
    approx = approximate_compensator(A)
    rows = []
    for lvl, step in zip(approx.levels, approx.steps):
        P = step.expand()
        defect = naturality_basis_defect(P)
        pred = is_grid_predictable(P, space.grid.master_level)
        rows.append(
            ReportRow(
                "natural",
                lvl,
                1.0,
                defect,
                defect,
                _verdict((defect <= 1e-10) == pred, "equivalence"),
            )
        )
    S = sc.processes.get("S")
    if S is not None and np.min(np.diff(S.values, axis=0)) >= -1e-12 and np.max(
        np.abs(S.values[0])
    ) <= 1e-12:
        defect = naturality_basis_defect(S)
        pred = is_grid_predictable(S, space.grid.master_level)
        rows.append(
            ReportRow(
                "natural:input",
                space.grid.master_level,
                1.0,
                defect,
                defect,
                _verdict((defect <= 1e-10) == pred, "equivalence"),
            )
        )
    return rows


def _task_fair(sc: Scenario) -> list[ReportRow]:
    tau = _require_tau(sc)
    space = tau.space
    cls = classify_stopping_time(tau)
    defect = fairness_basis_defect(tau)
    rows = [
        ReportRow(
            "fair",
            space.grid.master_level,
            1.0,
            defect,
            defect,
            _verdict((defect <= 1e-10) == cls.is_grid_predictable, "equivalence"),
        )
    ]
    if cls.is_grid_predictable:
        from .stopping import announcing_sequence

        sigmas, approx = dyadic_stop_approx(tau, return_approximation=True)
        for lvl, member in zip(approx.levels, announcing_sequence(sigmas)):
            d = fairness_basis_defect(member)
            pred = classify_stopping_time(member).is_grid_predictable
            rows.append(
                ReportRow(
                    "fair:announcing",
                    lvl,
                    float(space.expectation(member.float_times(inf_as=1.0))),
                    d,
                    d,
                    _verdict((d <= 1e-10) == pred, "equivalence"),
                )
            )
    return rows


def _task_continuity(cfg: ScenarioConfig) -> list[ReportRow]:
    rows = []
    for lvl in range(1, cfg.master_level + 1):
        sub = dict(cfg.to_dict())
        sub["master_level"] = lvl
        if cfg.kind == "bernoulli_counting":
            sub.pop("p", None)
            sub["lam"] = cfg.lam if cfg.lam is not None else cfg.effective_p() * (
                1 << cfg.master_level
            )
        if cfg.kind in ("deterministic_jump", "predictable_jump", "inaccessible_jump"):
            frac = as_fraction(cfg.jump_time)
            if (frac * (1 << lvl)).denominator != 1:
                continue  # jump time not representable at this level
        try:
            sub_cfg = ScenarioConfig.from_dict(sub)
            scenario = generate_scenario(sub_cfg)
        except BadConfig:
            continue
        S = _require_process(scenario, "S")
        space = S.space
        if "tau" in scenario.stopping_times and classify_stopping_time(
            scenario.stopping_times["tau"]
        ).is_grid_predictable:
            taus = [scenario.stopping_times["tau"]]
        else:
            taus = [GridStoppingTime.deterministic(space, Fraction(1, 2))]
        report = compensator_continuity_defect(S, taus)
        rows.append(
            ReportRow(
                "continuity",
                lvl,
                report.max_abs_compensator_jump,
                report.max_gap,
                float(np.mean([r.gap for r in report.rows])),
                _verdict(report.max_gap <= 1e-10, "jump-identity"),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# report emission

CSV_COLUMNS = ("task", "level", "time", "max_abs_error", "mean_abs_error", "verdict")


def render_report(report: ExperimentReport, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in report.rows:
            writer.writerow(
                [r.task, r.level, repr(r.time), repr(r.max_abs_error), repr(r.mean_abs_error), r.verdict]
            )
        return buf.getvalue()
    if fmt == "json":
        payload = {
            "seed": report.seed,
            "config": report.config,
            "rows": [
                {
                    "task": r.task,
                    "level": r.level,
                    "time": r.time,
                    "max_abs_error": r.max_abs_error,
                    "mean_abs_error": r.mean_abs_error,
                    "verdict": r.verdict,
                }
                for r in report.rows
            ],
        }
        return json.dumps(payload, indent=2) + "\n"
    raise BadConfig(f"unknown report format {fmt!r}")


def emit_report(report: ExperimentReport, fmt: str, path: str) -> None:
    """Write the rendered report; wraps write failures in IoError."""
    text = render_report(report, fmt)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {path!r}: {exc}") from exc
