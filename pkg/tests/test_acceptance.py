"""Acceptance gate: one test per shipping criterion.

Each test prints a single ``ACCEPTANCE nn <name>: PASS|FAIL|SKIP`` line on the
real terminal (bypassing capture) so the verdicts survive in piped logs.
Criteria 06-08 need benchmark scenario directories on disk; point ``ASLIB_DIR``
at a directory containing ``CSP-2010``, ``QBF-2011``, ``MAXSAT12-PMS`` (and
``SAT12-RAND`` for 06) to enable them.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats as scipy_stats

from conftest import build_scenario
from survsel import losses
from survsel import survival
from survsel.censoring import (
    ImputationStrategy,
    SurvivalDataset,
    forest_model_factory,
    schmee_hahn,
    truncated_normal_mean,
)
from survsel.cli import main as cli_main
from survsel.evaluation import evaluate_selector
from survsel.forest import ForestParams
from survsel.scenario import ScenarioView, compute_stats, load_scenario, save_scenario_csv
from survsel.selectors import SelectorConfig, make_selector
from survsel.stepfun import StepFunction
from survsel.synthetic import generate_synthetic, risk_aversion_spec

ASLIB_DIR = os.environ.get("ASLIB_DIR")
ASLIB_TRIO = ("CSP-2010", "QBF-2011", "MAXSAT12-PMS")

# every split is blocked, so each tree is a pooled hazard estimate; the
# risk-attitude criteria are about the loss shape, not about routing
POOLED = ForestParams(n_trees=10, min_samples_leaf=1 << 14, seed=0)


class _verdict:
    """Context manager printing the per-criterion outcome line."""

    def __init__(self, capsys, number, name):
        self.capsys = capsys
        self.tag = f"ACCEPTANCE {number:02d} {name}"

    def __enter__(self):
        return self

    def _say(self, outcome, detail=""):
        with self.capsys.disabled():
            print(f"{self.tag}: {outcome}{detail}", flush=True)

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self._say("PASS")
        elif issubclass(exc_type, pytest.skip.Exception):
            self._say("SKIP", f" ({exc})")
        else:
            self._say("FAIL")
        return False


def brute_force_nelson_aalen(times, censored):
    times = np.asarray(times, float)
    censored = np.asarray(censored, bool)
    knots, values, total = [], [], 0.0
    for t in np.unique(times[~censored]):
        d = int(((times == t) & ~censored).sum())
        at_risk = int((times >= t).sum())
        total += d / at_risk
        knots.append(t)
        values.append(total)
    return np.array(knots), np.array(values)


def test_criterion_01_nelson_aalen_oracle(capsys):
    with _verdict(capsys, 1, "nelson-aalen-oracle"):
        start = time.monotonic()
        rng = np.random.default_rng(101)
        for _ in range(500):
            n = int(rng.integers(1, 13))
            times = np.round(rng.uniform(0.1, 9.9, n), 1)  # ties likely
            censored = rng.random(n) < 0.35
            chf = survival.nelson_aalen(times, censored)
            knots, values = brute_force_nelson_aalen(times, censored)
            np.testing.assert_array_equal(chf.knots, knots)
            np.testing.assert_array_equal(chf.values, values)
        worked = survival.nelson_aalen([2.0, 4.0, 5.0], [False, True, False])
        np.testing.assert_allclose(worked.knots, [2.0, 5.0], rtol=0)
        np.testing.assert_allclose(worked.values, [1 / 3, 4 / 3], rtol=1e-12)
        assert time.monotonic() - start < 10.0


def random_sf(rng, cutoff):
    """Step SF with random knots straddling the cutoff and residual mass."""
    k = int(rng.integers(1, 9))
    knots = np.unique(np.round(rng.uniform(0.05, 1.3, k), 3)) * cutoff
    masses = rng.dirichlet(np.ones(knots.size + 1))  # last entry = residual
    values = 1.0 - np.cumsum(masses[:-1])
    return StepFunction(knots, values, 1.0)


def manual_expectation(sf, point_loss, timeout_loss, cutoff):
    """Direct discrete sum: loss at each knot at or below the cutoff, the
    timeout value for everything beyond."""
    total, prev = 0.0, sf.initial_value
    for t, v in zip(sf.knots, sf.values):
        if t > cutoff:
            break
        total += point_loss(t) * (prev - v)
        prev = v
    return total + timeout_loss * prev


def test_criterion_02_expected_loss_oracle(capsys):
    with _verdict(capsys, 2, "expected-loss-oracle"):
        start = time.monotonic()
        rng = np.random.default_rng(202)
        C = 10.0
        dominated = [
            (losses.identity(), losses.par10()),
            (losses.polynomial(4.0), losses.polynomial(2.0)),
            (losses.capped_log(0.3, 3.0), losses.capped_log(0.3, 6.0)),
        ]
        a_aff, b_aff = 3.5, 1.25
        base = losses.polynomial(2.0)
        prev_sf = None
        for _ in range(200):
            sf = random_sf(rng, C)
            got = survival.expected_loss(sf, losses.identity(), C)
            want = manual_expectation(sf, lambda t: t, C, C)
            assert got == pytest.approx(want, rel=1e-12)
            for lo, hi in dominated:
                assert survival.expected_loss(sf, lo, C) <= survival.expected_loss(
                    sf, hi, C
                ) * (1 + 1e-12) + 1e-12
            # affine transform a * loss + b: linearity and preserved argmin
            e_base = survival.expected_loss(sf, base, C)
            e_affine = manual_expectation(
                sf,
                lambda t: a_aff * losses.evaluate(base, t, C) + b_aff,
                a_aff * losses.timeout_value(base, C) + b_aff,
                C,
            )
            assert e_affine == pytest.approx(a_aff * e_base + b_aff, rel=1e-12)
            if prev_sf is not None:
                pair = [prev_sf, sf]
                plain = np.argmin([survival.expected_loss(s, base, C) for s in pair])
                affine = np.argmin(
                    [
                        manual_expectation(
                            s,
                            lambda t: a_aff * losses.evaluate(base, t, C) + b_aff,
                            a_aff * losses.timeout_value(base, C) + b_aff,
                            C,
                        )
                        for s in pair
                    ]
                )
                assert plain == affine
            prev_sf = sf
        assert time.monotonic() - start < 10.0


def risk_picks(loss_kind, seed, loss=None):
    """Fraction of fresh queries routed to each two-point algorithm."""
    s = generate_synthetic(risk_aversion_spec(n_instances=2000, seed=seed))
    view = ScenarioView(s, np.arange(s.n_instances))
    queries = generate_synthetic(risk_aversion_spec(n_instances=400, seed=seed + 1000)).features
    cfg = SelectorConfig(kind=loss_kind, forest=POOLED, loss=loss)
    picks = make_selector(cfg).fit(view, seed).select_batch(queries)
    names = list(s.algorithms)
    return {name: (picks == names.index(name)).mean() for name in names}


def test_criterion_03_risk_aversion_exp_vs_par10(capsys):
    with _verdict(capsys, 3, "risk-aversion-exp-vs-par10"):
        start = time.monotonic()
        wins = 0
        for seed in range(20):
            exp_frac = risk_picks("survival-exp", seed)["A3"]
            par_frac = risk_picks("survival-par10", seed)["A1"]
            wins += exp_frac >= 0.95 and par_frac >= 0.95
        assert wins >= 18
        assert time.monotonic() - start < 300.0


def test_criterion_04_polynomial_crossover(capsys):
    with _verdict(capsys, 4, "polynomial-crossover"):
        start = time.monotonic()
        wins = 0
        for seed in range(20):
            mild = risk_picks("survival-fixed", seed, loss=losses.polynomial(1.0))["A3"]
            harsh = risk_picks("survival-fixed", seed, loss=losses.polynomial(20.0))["A1"]
            wins += mild >= 0.95 and harsh >= 0.95
        assert wins >= 18
        assert time.monotonic() - start < 300.0


def test_criterion_05_exponential_recovery(capsys):
    with _verdict(capsys, 5, "exponential-recovery"):
        start = time.monotonic()
        grid = np.linspace(0.0, 4.0, 401)
        truth = np.exp(-grid)
        good = 0
        for seed in range(10):
            rng = np.random.default_rng([505, seed])
            t = rng.exponential(1.0, 5000)
            censored = t > 5.0
            d = SurvivalDataset(rng.normal(size=(5000, 2)), np.minimum(t, 5.0), censored, 5.0)
            model = survival.fit(d, POOLED, seed=seed)
            sf = survival.predict_survival(model, d.X[0])
            good += np.abs(sf(grid) - truth).max() <= 0.05
        assert good >= 9
        assert time.monotonic() - start < 120.0


def _aslib_or_skip(names):
    if not ASLIB_DIR:
        pytest.skip("ASLIB_DIR not set; benchmark scenario data not on disk")
    missing = [n for n in names if not (Path(ASLIB_DIR) / n).is_dir()]
    if missing:
        pytest.skip(f"missing scenario directories under ASLIB_DIR: {missing}")
    return [load_scenario(Path(ASLIB_DIR) / n) for n in names]


def test_criterion_06_benchmark_table_fidelity(capsys):
    with _verdict(capsys, 6, "benchmark-table-fidelity"):
        csp, sat = _aslib_or_skip(["CSP-2010", "SAT12-RAND"])
        st = compute_stats(csp)
        assert st.n_instances == 2024
        assert st.n_algorithms == 2
        assert st.n_features == 86
        assert st.cutoff == 5000.0
        assert st.pct_censored == pytest.approx(19.6, abs=0.1)
        assert compute_stats(sat).pct_censored == pytest.approx(73.5, abs=0.1)


def test_criterion_07_beats_single_best_on_benchmarks(capsys):
    with _verdict(capsys, 7, "beats-single-best-on-benchmarks"):
        scenarios = _aslib_or_skip(ASLIB_TRIO)
        cfg = SelectorConfig(kind="survival-par10", forest=ForestParams(n_trees=100))
        below = 0
        for s in scenarios:
            report = evaluate_selector(cfg, s, k_folds=10, seed=0)
            assert report.n_failed_folds == 0
            below += report.npar10 < 1.0
        assert below >= 2


def test_criterion_08_discarding_censored_runs_is_worst(capsys):
    with _verdict(capsys, 8, "discarding-censored-runs-is-worst"):
        scenarios = _aslib_or_skip(ASLIB_TRIO)
        medians = {}
        for strat in ("ignore", "cutoff"):
            cfg = SelectorConfig(
                kind="regressor",
                imputation=ImputationStrategy(strat),
                forest=ForestParams(n_trees=100),
            )
            scores = [
                evaluate_selector(cfg, s, k_folds=10, seed=0).npar10 for s in scenarios
            ]
            medians[strat] = float(np.median(scores))
        assert medians["ignore"] >= medians["cutoff"]


def test_criterion_09_reference_scores_are_exact(capsys):
    with _verdict(capsys, 9, "reference-scores-are-exact"):
        for seed in (0, 1):
            rng = np.random.default_rng(seed)
            s = build_scenario(rng.uniform(1.0, 60.0, size=(40, 2)), seed=seed)
            assert evaluate_selector("vbs", s, k_folds=4, seed=seed).npar10 == 0.0
            sbs = evaluate_selector(SelectorConfig(kind="sbs"), s, k_folds=4, seed=seed)
            assert sbs.npar10 == 1.0


def test_criterion_10_parallel_reports_are_byte_identical(capsys, tmp_path):
    with _verdict(capsys, 10, "parallel-reports-are-byte-identical"):
        rng = np.random.default_rng(77)
        for name in ("g1", "g2"):
            s = build_scenario(
                rng.uniform(1.0, 60.0, size=(30, 2)),
                censored=rng.random((30, 2)) < 0.1,
                name=name,
                seed=7,
            )
            save_scenario_csv(s, tmp_path / name)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"folds": 3, "n_trees": 8}))
        outputs = {}
        for jobs in (1, 8):
            out = tmp_path / f"jobs{jobs}"
            argv = [
                "sweep", "--config", str(config), "--seed", "7",
                "--jobs", str(jobs), "--out", str(out),
                "--scenario", str(tmp_path / "g1"), "--scenario", str(tmp_path / "g2"),
                "--selector", "vbs", "--selector", "sbs", "--selector", "survival-par10",
            ]
            assert cli_main(argv) == 0
            outputs[jobs] = out
        for name in ("summary.csv", "records.csv", "aggregate.csv", "aggregate.json"):
            assert (outputs[1] / name).read_bytes() == (outputs[8] / name).read_bytes()


def test_criterion_11_imputation_properties(capsys):
    with _verdict(capsys, 11, "imputation-properties"):
        quad, _ = integrate.quad(
            lambda t: t * scipy_stats.norm.pdf(t) / scipy_stats.norm.sf(0.0), 0.0, np.inf
        )
        got = truncated_normal_mean(0.0, 1.0, 0.0)
        assert got == pytest.approx(quad, abs=1e-4)
        assert got == pytest.approx(0.7979, abs=1e-4)
        factory = forest_model_factory(ForestParams(n_trees=5, seed=0))
        for case in range(100):
            rng = np.random.default_rng([1111, case])
            n = 30
            y = rng.uniform(1.0, 100.0, n)
            censored = rng.random(n) < 0.3
            censored[int(rng.integers(n))] = False  # keep the dataset usable
            y[censored] = 100.0
            d = SurvivalDataset(rng.normal(size=(n, 2)), y, censored, 100.0)
            labels = schmee_hahn(d, factory, seed=case)  # returns within max_iter
            assert np.isfinite(labels).all()
            assert (labels[censored] >= 100.0).all()
            np.testing.assert_array_equal(labels[~censored], y[~censored])
