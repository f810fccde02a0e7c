"""Command line front end.

Exit codes: 0 success, 1 invalid configuration or inapplicable task,
2 property violation (some verdict failed), 3 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import BadConfig, DoobgridError, IoError
from .scenarios import (
    ScenarioConfig,
    emit_report,
    generate_scenario,
    render_report,
    run_convergence_experiment,
)
from .selftest import run_selftest

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doobgrid",
        description=(
            "Scenario experiments for Doob decompositions, compensator"
            " approximation and predictable stopping times on finite"
            " dyadic filtrations."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON ScenarioConfig path")
        p.add_argument("--out", help="write the report to this path")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, help="override the config seed")

    common(sub.add_parser("scenario", help="emit the generated scenario"))
    common(sub.add_parser("compensate", help="step-process approximation errors"))
    common(sub.add_parser("stop-approx", help="finite-valued stopping approximations"))
    common(sub.add_parser("exhaust-jumps", help="jump exhaustion coverage"))
    check = sub.add_parser("check", help="theorem-level diagnostics")
    check.add_argument("what", choices=("natural", "fair", "continuity"))
    common(check)
    self_p = sub.add_parser("selftest", help="run the built-in verification battery")
    self_p.add_argument("--out", help="write the report to this path")
    self_p.add_argument("--format", choices=("csv", "json"), default="csv")
    self_p.add_argument("--seed", type=int, default=2024)
    self_p.add_argument("--sweeps", type=int, default=25)
    return parser


def _load_config(args) -> ScenarioConfig:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise BadConfig(f"cannot read config {args.config!r}: {exc}") from exc
    cfg = ScenarioConfig.from_json(text)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.validate()
    return cfg


def _emit_scenario(cfg: ScenarioConfig, fmt: str, out: str | None) -> int:
    scenario = generate_scenario(cfg)
    if fmt == "json":
        payload = {
            "config": cfg.to_dict(),
            "space": json.loads(scenario.space.to_json()),
            "processes": {
                name: json.loads(P.to_json())["values"]
                for name, P in sorted(scenario.processes.items())
            },
            "stopping_times": {
                name: json.loads(t.to_json())
                for name, t in sorted(scenario.stopping_times.items())
            },
        }
        text = json.dumps(payload, indent=2) + "\n"
    else:
        if "S" not in scenario.processes:
            raise BadConfig("scenario has no process 'S' to export as CSV")
        text = scenario.processes["S"].to_csv()
    _write(text, out)
    return EXIT_OK


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {out!r}: {exc}") from exc


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            report = run_selftest(seed=args.seed, sweeps=args.sweeps)
            if args.out:
                emit_report(report, args.format, args.out)
            else:
                sys.stdout.write(render_report(report, args.format))
            for row in report.rows:
                print(f"{row.task}: {row.verdict}", file=sys.stderr)
            print(
                f"selftest wall time: {report.runtimes['selftest']:.2f}s",
                file=sys.stderr,
            )
            return EXIT_OK if report.passed else EXIT_VIOLATION
        cfg = _load_config(args)
        if args.command == "scenario":
            return _emit_scenario(cfg, args.format, args.out)
        task = {"compensate": "compensate", "stop-approx": "stop-approx",
                "exhaust-jumps": "exhaust"}.get(args.command)
        if args.command == "check":
            task = {"natural": "natural", "fair": "fair", "continuity": "continuity"}[
                args.what
            ]
        report = run_convergence_experiment(cfg, task)
        if args.out:
            emit_report(report, args.format, args.out)
        else:
            sys.stdout.write(render_report(report, args.format))
        return EXIT_OK if report.passed else EXIT_VIOLATION
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BadConfig as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DoobgridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
