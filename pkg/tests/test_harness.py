import csv
import json
from pathlib import Path

import numpy as np
import pytest

from hybridvvc import cli
from hybridvvc.harness import (AgentConfig, CsvFormatError, RunConfig, RunSummary,
                               ScenarioConfig, compare, emit_plots, read_run_csv, run)
from hybridvvc.harness.runner import CSV_MAGIC, csv_header, load_grid_file
from hybridvvc.powergrid import ConfigError, GridConfig

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "hybridvvc" / "configs"


def rows_of(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    assert lines[0] == CSV_MAGIC
    return list(csv.reader(lines[1:]))


@pytest.mark.parametrize("mode", ["rules_only", "pure_sac", "hybrid"])
def test_schema_and_step_conservation(tmp_path, mode):
    summary = run(RunConfig(mode=mode, steps=120, seed=1, out_dir=str(tmp_path)))
    rows = rows_of(tmp_path / "run.csv")
    header, body = rows[0], rows[1:]
    assert header == csv_header(mode, 15)
    assert len(body) == 120
    assert all(len(r) == len(header) for r in body)
    assert [int(r[0]) for r in body] == list(range(120))
    perf_cols = [i for i, h in enumerate(header) if "perf" in h or h.startswith("tracked")]
    for r in body:
        for i in perf_cols:
            assert 0.0 <= float(r[i]) <= 1.0
    assert summary.steps == 120
    assert int(body[-1][-1]) == summary.violation_count
    saved = RunSummary.from_json_file(tmp_path / "summary.json")
    assert saved == summary


def test_floats_have_nine_significant_digits(tmp_path):
    run(RunConfig(mode="rules_only", steps=30, seed=0, out_dir=str(tmp_path)))
    body = rows_of(tmp_path / "run.csv")[1:]
    for r in body:
        for cell in r[3:-2]:
            digits = cell.lstrip("-").replace(".", "").split("e")[0].lstrip("0")
            assert len(digits) <= 9


def test_solver_failures_do_not_drop_steps(tmp_path):
    summary = run(RunConfig(mode="pure_sac", steps=60, seed=0, out_dir=str(tmp_path)))
    assert summary.solver_failures >= 1
    assert len(rows_of(tmp_path / "run.csv")) == 61


def test_same_seed_same_bytes(tmp_path):
    for mode in ("hybrid", "pure_sac"):
        a, b = tmp_path / f"{mode}a", tmp_path / f"{mode}b"
        run(RunConfig(mode=mode, steps=150, seed=4, out_dir=str(a)))
        run(RunConfig(mode=mode, steps=150, seed=4, out_dir=str(b)))
        assert (a / "run.csv").read_bytes() == (b / "run.csv").read_bytes()


def test_different_seed_different_run(tmp_path):
    run(RunConfig(mode="rules_only", steps=50, seed=1, out_dir=str(tmp_path / "a")))
    run(RunConfig(mode="rules_only", steps=50, seed=2, out_dir=str(tmp_path / "b")))
    assert (tmp_path / "a/run.csv").read_bytes() != (tmp_path / "b/run.csv").read_bytes()


def test_rules_only_constant_demand_rises_to_plateau():
    scen = ScenarioConfig(base_load=0.05, amplitude=0.0, noise=0.0)
    from hybridvvc.harness import Experiment

    ex = Experiment(RunConfig(mode="rules_only", steps=150, seed=0, scenario=scen))
    perfs = []
    for t in range(150):
        perfs.append(ex._step_rules(t)[1].performance)
    assert ex.env.violation_count == 0
    assert np.all(np.diff(perfs) >= -1e-12)
    assert perfs[-1] - perfs[-10] < 1e-4
    assert perfs[-1] > 0.99


def test_eval_after_freezes_learning():
    a = run(RunConfig(mode="pure_sac", steps=200, seed=0, eval_after=100))
    b = run(RunConfig(mode="pure_sac", steps=200, seed=0))  # default: steps // 2
    assert a.train_updates == b.train_updates
    assert a.buffer_size == 100
    c = run(RunConfig(mode="pure_sac", steps=200, seed=0, eval_after=200))
    assert c.buffer_size == 200 and c.train_updates > a.train_updates


def test_hybrid_never_freezes_by_default():
    assert RunConfig(mode="hybrid", steps=100).resolved_eval_after() is None
    s = run(RunConfig(mode="hybrid", steps=100, seed=0))
    assert s.buffer_size == 300


def test_invalid_run_config():
    with pytest.raises(ConfigError):
        RunConfig(mode="ppo").validate()
    with pytest.raises(ConfigError):
        RunConfig(steps=0).validate()


def test_packaged_configs_are_the_defaults():
    grid, scen = load_grid_file(CONFIGS / "grid.cfg")
    assert grid == GridConfig() and scen == ScenarioConfig()
    assert AgentConfig.from_file(CONFIGS / "agent.cfg") == AgentConfig()
    load_grid_file(CONFIGS / "resistive_grid.cfg")
    AgentConfig.from_file(CONFIGS / "fast_agent.cfg")


def test_unknown_scenario_key(tmp_path):
    p = tmp_path / "g.cfg"
    p.write_text("demand_wobble = 3\n")
    with pytest.raises(ConfigError):
        load_grid_file(p)


def test_plots_for_hybrid_and_rules(tmp_path):
    for mode in ("hybrid", "rules_only"):
        out = tmp_path / mode
        run(RunConfig(mode=mode, steps=40, seed=0, out_dir=str(out)))
        cols, _ = read_run_csv(out / "run.csv")
        assert ("tracked_adaptive" in cols) == (mode == "hybrid")
        paths = emit_plots(out / "run.csv", out / "plots")
        assert [p.name for p in paths] == ["performance.png", "voltages.png"]
        assert all(p.stat().st_size > 0 for p in paths)


def test_malformed_csv_reports_line(tmp_path):
    src = tmp_path / "run"
    run(RunConfig(mode="rules_only", steps=10, seed=0, out_dir=str(src)))
    lines = (src / "run.csv").read_text().splitlines()
    bad = tmp_path / "short.csv"
    bad.write_text("\n".join(lines[:5] + [lines[5] + ",extra"] + lines[6:]) + "\n")
    with pytest.raises(CsvFormatError) as err:
        emit_plots(bad, tmp_path / "p")
    assert err.value.line == 6
    nan = tmp_path / "nan.csv"
    cells = lines[4].split(",")
    cells[3] = "oops"
    nan.write_text("\n".join(lines[:4] + [",".join(cells)] + lines[5:]) + "\n")
    with pytest.raises(CsvFormatError, match=":5:"):
        emit_plots(nan, tmp_path / "p")


@pytest.mark.slow
def test_full_length_plot_renders_every_step(tmp_path):
    run(RunConfig(mode="hybrid", steps=5760, seed=0, out_dir=str(tmp_path)))
    cols, _ = read_run_csv(tmp_path / "run.csv")
    assert len(cols["step"]) == 5760
    emit_plots(tmp_path / "run.csv", tmp_path / "plots")


def test_compare_report(tmp_path):
    run(RunConfig(mode="pure_sac", steps=60, seed=0, out_dir=str(tmp_path / "b")))
    run(RunConfig(mode="hybrid", steps=60, seed=0, out_dir=str(tmp_path / "h")))
    report = compare(tmp_path / "b", tmp_path / "h/summary.json")
    rows = {k: (b, h) for k, b, h in report.rows}
    assert rows["violations"][1] == 0 and rows["violations"][0] > 0
    text = report.to_text()
    assert "first switch to adaptive" in text and "pure_sac" in text


# -- CLI ----------------------------------------------------------------------

def test_cli_run_plot_compare(tmp_path, capsys):
    base, hyb = tmp_path / "base", tmp_path / "hyb"
    assert cli.main(["run", "--mode", "pure_sac", "--steps", "40", "--seed", "2",
                     "--out", str(base)]) == 0
    assert cli.main(["run", "--mode", "hybrid", "--steps", "40", "--seed", "2",
                     "--grid-config", str(CONFIGS / "grid.cfg"),
                     "--agent-config", str(CONFIGS / "agent.cfg"), "--out", str(hyb)]) == 0
    out = capsys.readouterr().out
    assert json.loads(out[out.rindex("{\n"):])["mode"] == "hybrid"
    assert cli.main(["plot", "--csv", str(hyb / "run.csv"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p/voltages.png").exists()
    assert cli.main(["compare", "--baseline", str(base), "--hybrid", str(hyb)]) == 0
    assert "violations" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("node_count = 1\n")
    with pytest.raises(SystemExit) as err:
        cli.main(["run", "--mode", "nope", "--out", str(tmp_path)])
    assert err.value.code == 1
    assert cli.main(["run", "--grid-config", str(bad), "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--grid-config", str(tmp_path / "missing.cfg"),
                     "--out", str(tmp_path)]) == 1
    assert cli.main(["run", "--steps", "0", "--out", str(tmp_path)]) == 1
    assert cli.main(["plot", "--csv", str(bad), "--out", str(tmp_path)]) == 2
    assert cli.main(["compare", "--baseline", str(tmp_path), "--hybrid", str(tmp_path)]) == 2


def test_cli_runtime_error_exit_code(tmp_path, monkeypatch):
    from hybridvvc.harness import runner

    def boom(self, *a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(runner.Experiment, "run", boom)
    assert cli.main(["run", "--steps", "5", "--out", str(tmp_path)]) == 2
