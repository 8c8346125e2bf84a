"""Command-line entry points, exercised in process through ``main``."""

import csv
import json

import numpy as np
import pytest

from conftest import build_scenario
from survsel import __version__
from survsel.cli import main
from survsel.evaluation import EvaluationReport, FoldResult
from survsel.scenario import compute_stats, load_scenario, save_scenario_csv


@pytest.fixture
def run(caplog):
    """Invoke the CLI and return (exit_code, joined log text)."""

    def invoke(*argv):
        caplog.clear()
        with caplog.at_level("INFO"):
            code = main(list(argv))
        return code, "\n".join(r.message for r in caplog.records)

    return invoke


def write_config(tmp_path, values, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(values))
    return str(path)


def make_scenario_dir(tmp_path, name, seed, n=30):
    rng = np.random.default_rng(seed)
    runtimes = rng.uniform(1.0, 60.0, size=(n, 2))
    censored = rng.random((n, 2)) < 0.1
    s = build_scenario(runtimes, censored=censored, name=name, seed=seed)
    out = tmp_path / name
    save_scenario_csv(s, out)
    return str(out)


# -- stats -----------------------------------------------------------------


def test_stats_prints_scenario_table(run, capsys, aslib_dir):
    code, _ = run("stats", str(aslib_dir))
    assert code == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0].split() == ["scenario", "#I", "#U", "#A", "#F", "C", "%C"]
    st = compute_stats(load_scenario(aslib_dir))
    row = lines[1].split()
    assert row == [
        load_scenario(aslib_dir).name,
        str(st.n_instances),
        str(st.n_unsolvable),
        str(st.n_algorithms),
        str(st.n_features),
        f"{st.cutoff:g}",
        f"{st.pct_censored:.1f}",
    ]
    assert row[1:4] == ["4", "1", "2"]
    assert row[5] == "50" and row[6] == "50.0"


def test_stats_without_paths_fails(run):
    code, logged = run("stats")
    assert code == 1
    assert "no scenario paths" in logged


def test_stats_names_a_bad_path(run, tmp_path):
    bad = tmp_path / "nope"
    code, logged = run("stats", str(bad))
    assert code == 1
    assert str(bad) in logged


# -- synth -----------------------------------------------------------------


def test_synth_round_trips_through_loader(run, tmp_path):
    cfg = write_config(tmp_path, {"preset": "two-point-risk", "n_instances": 40})
    out = tmp_path / "scen"
    code, _ = run("synth", "--config", cfg, "--seed", "5", "--out", str(out))
    assert code == 0
    s = load_scenario(out)
    assert s.n_instances == 40
    assert s.algorithms == ("A1", "A3")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 5
    assert manifest["version"] == __version__
    assert manifest["config"]["preset"] == "two-point-risk"
    assert "timestamp" in manifest


def test_synth_requires_a_seed(run, tmp_path):
    code, logged = run("synth", "--out", str(tmp_path / "x"))
    assert code == 1
    assert "seed" in logged


def test_seed_env_var_with_flag_precedence(run, tmp_path, monkeypatch):
    monkeypatch.setenv("SURVSEL_SEED", "9")
    cfg = write_config(tmp_path, {"preset": "two-point-risk", "n_instances": 10})
    out_a = tmp_path / "a"
    code, _ = run("synth", "--config", cfg, "--out", str(out_a))
    assert code == 0
    assert json.loads((out_a / "manifest.json").read_text())["seed"] == 9
    out_b = tmp_path / "b"
    code, _ = run("synth", "--config", cfg, "--seed", "4", "--out", str(out_b))
    assert code == 0
    assert json.loads((out_b / "manifest.json").read_text())["seed"] == 4


def test_overwrite_guard(run, tmp_path):
    cfg = write_config(tmp_path, {"preset": "two-point-risk", "n_instances": 10})
    out = tmp_path / "scen"
    assert run("synth", "--config", cfg, "--seed", "1", "--out", str(out))[0] == 0
    code, logged = run("synth", "--config", cfg, "--seed", "1", "--out", str(out))
    assert code == 1
    assert "not empty" in logged
    code, _ = run("synth", "--config", cfg, "--seed", "1", "--out", str(out), "--overwrite")
    assert code == 0


# -- config handling -------------------------------------------------------


def test_unknown_config_key_is_rejected(run, tmp_path):
    cfg = write_config(tmp_path, {"bogus_key": 3})
    code, logged = run("stats", "--config", cfg)
    assert code == 1
    assert "bogus_key" in logged


def test_config_type_error_names_the_field(run, tmp_path):
    cfg = write_config(tmp_path, {"folds": "three"})
    code, logged = run("stats", "--config", cfg)
    assert code == 1
    assert "folds" in logged


def test_invalid_json_config(run, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{nope")
    code, logged = run("stats", "--config", str(path))
    assert code == 1
    assert "broken.json" in logged


# -- evaluate --------------------------------------------------------------


def eval_config(tmp_path):
    return write_config(tmp_path, {"folds": 3, "n_trees": 8})


def test_evaluate_writes_reports_and_figures(run, tmp_path):
    sdir = make_scenario_dir(tmp_path, "s1", seed=1)
    out = tmp_path / "out"
    code, _ = run(
        "evaluate",
        "--config",
        eval_config(tmp_path),
        "--seed",
        "3",
        "--scenario",
        sdir,
        "--selector",
        "vbs",
        "--selector",
        "sbs",
        "--out",
        str(out),
    )
    assert code == 0
    with open(out / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["selector"] for r in rows] == ["vbs", "sbs"]
    assert float(rows[0]["npar10"]) == 0.0
    assert float(rows[1]["npar10"]) == 1.0
    assert (out / "records.csv").exists()
    assert (out / "manifest.json").exists()
    for label in ("vbs", "sbs"):
        fig = out / f"folds_{label}.png"
        assert fig.exists() and fig.stat().st_size > 0


def test_evaluate_needs_exactly_one_scenario(run, tmp_path):
    a = make_scenario_dir(tmp_path, "sa", seed=2)
    b = make_scenario_dir(tmp_path, "sb", seed=3)
    code, logged = run(
        "evaluate", "--seed", "1", "--scenario", a, "--scenario", b,
        "--selector", "sbs", "--out", str(tmp_path / "o"),
    )
    assert code == 1
    assert "exactly one scenario" in logged


def test_duplicate_selector_labels_rejected(run, tmp_path):
    sdir = make_scenario_dir(tmp_path, "s1", seed=4)
    code, logged = run(
        "evaluate", "--seed", "1", "--scenario", sdir,
        "--selector", "sbs", "--selector", "sbs", "--out", str(tmp_path / "o"),
    )
    assert code == 1
    assert "duplicate" in logged


def test_failed_folds_exit_code(run, tmp_path, monkeypatch):
    import survsel.cli as cli

    bad_fold = FoldResult(1, 5, np.nan, np.nan, np.nan, np.nan, 0, 0, "boom")
    ok_fold = FoldResult(2, 5, 10.0, 5.0, 20.0, 1 / 3, 0, 5)
    stub = EvaluationReport(
        scenario="s1",
        selector="sbs",
        seed=0,
        n_folds=2,
        folds=(bad_fold, ok_fold),
        records=(),
        par10=10.0,
        par10_vbs=5.0,
        par10_sbs=20.0,
        npar10=1 / 3,
        timeouts=0,
        solved=5,
        n_instances=5,
    )
    monkeypatch.setattr(cli, "_run_cell", lambda *a: stub)
    sdir = make_scenario_dir(tmp_path, "s1", seed=5)
    code, logged = run(
        "evaluate", "--seed", "1", "--scenario", sdir,
        "--selector", "sbs", "--out", str(tmp_path / "o"),
    )
    assert code == 2
    assert "1 of 2 folds failed" in logged


def test_evaluate_two_point_beats_single_best(run, tmp_path):
    # with the latent-scale feature exposed, the safe algorithm times out on
    # high-multiplier instances and the risky one stays worth charging, so a
    # per-instance policy beats any constant choice
    synth_cfg = write_config(
        tmp_path,
        {
            "algorithms": [
                "A=two-point:p_fast=1,t_fast=90",
                "B=two-point:p_fast=0.85,t_fast=10,t_slow=200",
            ],
            "feature_model": "linked",
            "n_instances": 2000,
        },
        name="synth.json",
    )
    sdir = tmp_path / "linked"
    assert run("synth", "--config", synth_cfg, "--seed", "3", "--out", str(sdir))[0] == 0
    eval_cfg = write_config(
        tmp_path, {"folds": 5, "n_trees": 16, "min_samples_leaf": 64}, name="eval.json"
    )
    out = tmp_path / "out"
    code, _ = run(
        "evaluate", "--config", eval_cfg, "--seed", "11",
        "--scenario", str(sdir), "--selector", "survival-par10", "--out", str(out),
    )
    assert code == 0
    with open(out / "summary.csv", newline="") as fh:
        (row,) = list(csv.DictReader(fh))
    assert float(row["npar10"]) < 1.0


# -- sweep -----------------------------------------------------------------

SWEEP_SELECTORS = ["vbs", "sbs", "survival-par10"]


def run_sweep(run, tmp_path, out_name, jobs):
    args = [
        "sweep",
        "--config",
        eval_config(tmp_path),
        "--seed",
        "7",
        "--jobs",
        str(jobs),
        "--out",
        str(tmp_path / out_name),
    ]
    for name, seed in (("s1", 1), ("s2", 2)):
        args += ["--scenario", make_scenario_dir(tmp_path, name, seed)]
    for sel in SWEEP_SELECTORS:
        args += ["--selector", sel]
    code, _ = run(*args)
    assert code == 0
    return tmp_path / out_name


def test_sweep_outputs_and_parallel_determinism(run, tmp_path):
    serial = run_sweep(run, tmp_path, "serial", jobs=1)
    parallel = run_sweep(run, tmp_path, "parallel", jobs=2)
    for name in ("summary.csv", "records.csv", "aggregate.csv", "aggregate.json"):
        assert (serial / name).read_bytes() == (parallel / name).read_bytes()
    with open(serial / "aggregate.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(SWEEP_SELECTORS)
    assert rows[0]["selector"] == "vbs"  # the oracle always ranks first
    heat = serial / "npar10.png"
    assert heat.exists() and heat.stat().st_size > 0


# -- tune ------------------------------------------------------------------


def test_tune_trace_row_count_matches_budget(run, tmp_path):
    sdir = make_scenario_dir(tmp_path, "s1", seed=8, n=40)
    cfg = write_config(tmp_path, {"tune_evaluations": 3, "n_trees": 6})
    out = tmp_path / "out"
    code, _ = run(
        "tune", "--config", cfg, "--seed", "2", "--scenario", sdir, "--out", str(out)
    )
    assert code == 0
    with open(out / "trace.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    fig = out / "trace.png"
    assert fig.exists() and fig.stat().st_size > 0
    assert json.loads((out / "manifest.json").read_text())["command"] == "tune"
