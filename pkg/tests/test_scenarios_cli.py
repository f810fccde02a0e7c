import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

import doobgrid as dg
from doobgrid.cli import main
from doobgrid.errors import BadConfig, IoError
from doobgrid.scenarios import (
    CSV_COLUMNS,
    ScenarioConfig,
    emit_report,
    generate_scenario,
    render_report,
    run_convergence_experiment,
)


def test_config_validation():
    with pytest.raises(BadConfig):
        ScenarioConfig(kind="nope", master_level=3).validate()
    with pytest.raises(BadConfig):
        ScenarioConfig(kind="bernoulli_counting", master_level=0, p=0.5).validate()
    with pytest.raises(BadConfig):
        ScenarioConfig(kind="bernoulli_counting", master_level=13, p=0.5).validate()
    with pytest.raises(BadConfig):
        ScenarioConfig(kind="bernoulli_counting", master_level=3, p=1.5).validate()
    with pytest.raises(BadConfig):
        ScenarioConfig(kind="bernoulli_counting", master_level=5, p=0.5).validate()
    with pytest.raises(BadConfig):
        ScenarioConfig(kind="deterministic_jump", master_level=3).validate()
    with pytest.raises(BadConfig):
        ScenarioConfig(
            kind="deterministic_jump", master_level=3, jump_time=0.3
        ).validate()
    with pytest.raises(BadConfig):
        ScenarioConfig.from_json("not json")
    with pytest.raises(BadConfig):
        ScenarioConfig.from_json('{"kind": "deterministic_jump"}')
    with pytest.raises(BadConfig):
        ScenarioConfig.from_json(
            '{"kind": "deterministic_jump", "master_level": 3, "jump_time": 0.5,'
            ' "bogus": 1}'
        )


def test_bernoulli_scenario_closed_form():
    cfg = ScenarioConfig(kind="bernoulli_counting", master_level=3, p=0.5).validate()
    sc = generate_scenario(cfg)
    assert sc.space.n_outcomes == 2**8
    assert len(sc.space.blocks_at(0)) == 1
    assert len(sc.space.blocks_at(8)) == 2**8
    N, A, M = sc.processes["N"], sc.processes["A"], sc.processes["M"]
    assert N.is_adapted
    ks = np.arange(9)
    assert np.allclose(A.values[:, 0], ks * 0.5)
    assert dg.martingale_defect(M) <= 1e-12
    assert float(sc.space.prob.sum()) == pytest.approx(1.0, abs=1e-12)


def test_scenario_determinism_bit_for_bit():
    cfg = ScenarioConfig(kind="bernoulli_counting", master_level=3, p=0.3, seed=7)
    a = generate_scenario(cfg.validate())
    b = generate_scenario(cfg.validate())
    assert np.array_equal(a.space.prob, b.space.prob)
    assert np.array_equal(a.processes["N"].values, b.processes["N"].values)
    ra = render_report(run_convergence_experiment(cfg, "compensate"), "json")
    rb = render_report(run_convergence_experiment(cfg, "compensate"), "json")
    assert ra == rb
    ca = render_report(run_convergence_experiment(cfg, "compensate"), "csv")
    cb = render_report(run_convergence_experiment(cfg, "compensate"), "csv")
    assert ca == cb


def test_deterministic_jump_scenario():
    cfg = ScenarioConfig(
        kind="deterministic_jump", master_level=4, jump_time=0.5
    ).validate()
    sc = generate_scenario(cfg)
    assert sc.space.n_outcomes == 1
    assert sc.stopping_times["tau"].times() == [Fraction(1, 2)]
    rep = run_convergence_experiment(cfg, "compensate")
    assert rep.passed
    final = [r for r in rep.rows if r.level == 4]
    assert final and all(r.max_abs_error <= 1e-10 for r in final)
    rep = run_convergence_experiment(cfg, "stop-approx")
    by_level = {r.level: r for r in rep.rows}
    for n, row in by_level.items():
        assert row.time == pytest.approx(0.5 - 2.0**-n)


def test_predictable_vs_inaccessible_jump():
    pred = generate_scenario(
        ScenarioConfig(kind="predictable_jump", master_level=3, jump_time=0.5).validate()
    )
    cls = dg.classify_stopping_time(pred.stopping_times["tau"])
    assert cls.is_stopping and cls.is_grid_predictable
    inher = generate_scenario(
        ScenarioConfig(
            kind="inaccessible_jump", master_level=3, jump_time=0.5
        ).validate()
    )
    cls = dg.classify_stopping_time(inher.stopping_times["tau"])
    assert cls.is_stopping and not cls.is_grid_predictable


def test_reflected_walk_is_submartingale():
    sc = generate_scenario(
        ScenarioConfig(kind="reflected_walk", master_level=3).validate()
    )
    S, A = sc.processes["S"], sc.processes["A"]
    assert np.min(np.diff(A.values, axis=0)) >= -1e-12
    M = dg.ProcessPaths(sc.space, S.values - A.values)
    assert dg.martingale_defect(M) <= 1e-10


def test_custom_tree_scenario(space2):
    tree = {
        "weights": [0.5, 0.5],
        "partitions": [[[0, 1]], [[0], [1]], [[0], [1]]],
        "outcomes": ["u", "d"],
        "process": [[0, 0], [1, 0], [1, 0]],
        "tau": {"u": 0.5, "d": 1.0},
    }
    cfg = ScenarioConfig(kind="custom_tree", master_level=1, tree=tree).validate()
    sc = generate_scenario(cfg)
    assert np.allclose(sc.processes["A"].values, [[0, 0], [0.5, 0.5], [0.5, 0.5]])
    bad = dict(tree)
    bad["weights"] = [0.5]
    with pytest.raises(BadConfig):
        generate_scenario(
            ScenarioConfig(kind="custom_tree", master_level=1, tree=bad).validate()
        )


def test_report_rendering_and_columns(tmp_path):
    cfg = ScenarioConfig(
        kind="deterministic_jump", master_level=3, jump_time=0.5
    ).validate()
    rep = run_convergence_experiment(cfg, "compensate")
    csv_text = render_report(rep, "csv")
    header = csv_text.splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    assert len(csv_text.splitlines()) == len(rep.rows) + 1
    payload = json.loads(render_report(rep, "json"))
    assert set(payload) == {"seed", "config", "rows"}
    assert [r["level"] for r in payload["rows"]] == [r.level for r in rep.rows]
    # csv and json carry the same values
    for line, row in zip(csv_text.splitlines()[1:], payload["rows"]):
        parts = line.split(",")
        assert parts[0] == row["task"]
        assert int(parts[1]) == row["level"]
        assert float(parts[2]) == row["time"]
        assert float(parts[3]) == row["max_abs_error"]
    out = tmp_path / "report.csv"
    emit_report(rep, "csv", str(out))
    assert out.read_text() == csv_text
    with pytest.raises(IoError):
        emit_report(rep, "csv", str(tmp_path / "missing" / "report.csv"))


def test_empty_report_has_header_only():
    from doobgrid.scenarios import ExperimentReport

    rep = ExperimentReport([], {}, 0)
    assert render_report(rep, "csv") == ",".join(CSV_COLUMNS) + "\n"


def _write_cfg(tmp_path, payload):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(payload))
    return str(path)


def test_cli_compensate_roundtrip(tmp_path, capsys):
    cfg = _write_cfg(
        tmp_path, {"kind": "deterministic_jump", "master_level": 3, "jump_time": 0.5}
    )
    out = tmp_path / "rep.csv"
    code = main(["compensate", "--config", cfg, "--out", str(out)])
    assert code == 0
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    code = main(["check", "natural", "--config", cfg, "--format", "json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert all(r["verdict"] == "pass" for r in payload["rows"])


def test_cli_scenario_emission(tmp_path, capsys):
    cfg = _write_cfg(
        tmp_path,
        {"kind": "predictable_jump", "master_level": 2, "jump_time": 0.5},
    )
    code = main(["scenario", "--config", cfg, "--format", "json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["space"]["master_level"] == 2
    assert "S" in payload["processes"]
    assert payload["stopping_times"]["tau"]["stay"] == "inf"
    code = main(["scenario", "--config", cfg, "--format", "csv"])
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "time,outcome,value"


def test_cli_exit_codes(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["compensate", "--config", missing]) == 1
    bad = _write_cfg(tmp_path, {"kind": "nope", "master_level": 3})
    assert main(["compensate", "--config", bad]) == 1
    # inapplicable task: inaccessible jump cannot be dyadically stop-approximated
    inacc = _write_cfg(
        tmp_path, {"kind": "inaccessible_jump", "master_level": 3, "jump_time": 0.5}
    )
    assert main(["stop-approx", "--config", inacc]) == 1
    good = _write_cfg(
        tmp_path, {"kind": "deterministic_jump", "master_level": 3, "jump_time": 0.5}
    )
    unwritable = str(tmp_path / "no" / "dir" / "out.csv")
    assert main(["compensate", "--config", good, "--out", unwritable]) == 3
    capsys.readouterr()


def test_cli_selftest_quick(capsys):
    code = main(["selftest", "--sweeps", "4", "--seed", "1"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert "selftest wall time" in captured.err


def test_cli_entry_point_subprocess(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps({"kind": "deterministic_jump", "master_level": 2, "jump_time": 0.5})
    )
    proc = subprocess.run(
        [sys.executable, "-m", "doobgrid.cli", "exhaust-jumps", "--config", str(cfg)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == ",".join(CSV_COLUMNS)
