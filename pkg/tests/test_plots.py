"""Report figures: files get written even for awkward inputs."""

import numpy as np

from survsel.evaluation import EvaluationReport, FoldResult
from survsel.losses import parse_loss
from survsel.plots import render_fold_bars, render_npar10_heatmap, render_tune_trace
from survsel.tuning import TuneResult


def report(selector, scenario, npar10, folds=()):
    return EvaluationReport(
        scenario=scenario,
        selector=selector,
        seed=0,
        n_folds=max(2, len(folds)),
        folds=tuple(folds),
        records=(),
        par10=50.0,
        par10_vbs=10.0,
        par10_sbs=90.0,
        npar10=npar10,
        timeouts=1,
        solved=9,
        n_instances=10,
    )


def test_heatmap_handles_infinite_and_missing_cells(tmp_path):
    # an infinite score (degenerate reference gap) must not break rendering
    reports = [
        report("a", "s1", 0.4),
        report("a", "s2", float("inf")),
        report("b", "s1", 1.2),
        report("b", "s2", 0.9),
    ]
    path = tmp_path / "heat.png"
    assert render_npar10_heatmap(reports, path) == str(path)
    assert path.stat().st_size > 0


def test_fold_bars_skip_failed_folds(tmp_path):
    folds = [
        FoldResult(1, 5, 40.0, 10.0, 90.0, 0.375, 1, 4),
        FoldResult(2, 5, np.nan, np.nan, np.nan, np.nan, 0, 0, "exploded"),
        FoldResult(3, 5, 60.0, 10.0, 90.0, 0.625, 1, 4),
    ]
    path = tmp_path / "bars.png"
    assert render_fold_bars(report("a", "s1", 0.5, folds), path) == str(path)
    assert path.stat().st_size > 0


def test_tune_trace_rendering(tmp_path):
    trace = (
        (parse_loss("poly:alpha=2"), 120.0),
        (parse_loss("log:alpha=0.2,beta=4"), 95.0),
        (parse_loss("poly:alpha=11"), 101.0),
    )
    result = TuneResult(
        best=trace[1][0],
        trace=trace,
        degenerate=False,
        inner_train=("i0",),
        inner_validation=("i1",),
    )
    path = tmp_path / "trace.png"
    assert render_tune_trace(result, path) == str(path)
    assert path.stat().st_size > 0
