"""Shared builders for hand-sized scenarios and on-disk fixture directories."""

import textwrap

import numpy as np
import pytest

from survsel.scenario import Scenario


def build_scenario(
    runtimes,
    censored=None,
    cutoff=100.0,
    features=None,
    feature_costs=None,
    folds=None,
    name="toy",
    seed=0,
):
    """Scenario from a runtime matrix; censored cells are forced to the cutoff."""
    runtimes = np.array(runtimes, dtype=float)
    n, m = runtimes.shape
    censored = (
        np.zeros((n, m), dtype=bool) if censored is None else np.array(censored, dtype=bool)
    )
    runtimes[censored] = cutoff
    if features is None:
        rng = np.random.default_rng(seed)
        features = rng.normal(size=(n, 2))
    features = np.array(features, dtype=float)
    if feature_costs is None:
        feature_costs = np.zeros(n)
    return Scenario(
        name=name,
        algorithms=tuple(f"algo_{j}" for j in range(m)),
        instances=tuple(f"inst_{i}" for i in range(n)),
        feature_names=tuple(f"f{c}" for c in range(features.shape[1])),
        features=features,
        feature_costs=np.array(feature_costs, dtype=float),
        runtimes=runtimes,
        censored=censored,
        cutoff=cutoff,
        folds=None if folds is None else np.array(folds, dtype=int),
    )


@pytest.fixture
def aslib_dir(tmp_path):
    """Minimal ASlib-style directory: 4 instances, 2 algorithms, 2 features.

    inst_c times out for both algorithms (unsolvable); inst_d has a missing
    feature value and a missing run cell for fast_algo.
    """
    (tmp_path / "description.txt").write_text(
        textwrap.dedent(
            """\
            scenario_id: TOY-MINI
            performance_measures: runtime
            maximize: false
            algorithm_cutoff_time: 50
            """
        )
    )
    (tmp_path / "algorithm_runs.arff").write_text(
        textwrap.dedent(
            """\
            @RELATION ALGORITHM_RUNS_TOY
            @ATTRIBUTE instance_id STRING
            @ATTRIBUTE repetition NUMERIC
            @ATTRIBUTE algorithm STRING
            @ATTRIBUTE runtime NUMERIC
            @ATTRIBUTE runstatus {ok,timeout,memout,crash}
            @DATA
            inst_a,1,fast_algo,5.0,ok
            inst_a,1,slow_algo,20.0,ok
            inst_b,1,fast_algo,50.0,timeout
            inst_b,1,slow_algo,12.0,ok
            inst_c,1,fast_algo,50.0,timeout
            inst_c,1,slow_algo,49.0,memout
            inst_d,1,slow_algo,2.5,ok
            """
        )
    )
    (tmp_path / "feature_values.arff").write_text(
        textwrap.dedent(
            """\
            @RELATION FEATURES_TOY
            @ATTRIBUTE instance_id STRING
            @ATTRIBUTE repetition NUMERIC
            @ATTRIBUTE size NUMERIC
            @ATTRIBUTE density NUMERIC
            @DATA
            inst_a,1,10.0,0.5
            inst_b,1,20.0,0.25
            inst_c,1,30.0,0.75
            inst_d,1,?,0.1
            """
        )
    )
    (tmp_path / "feature_costs.arff").write_text(
        textwrap.dedent(
            """\
            @RELATION FEATURE_COSTS_TOY
            @ATTRIBUTE instance_id STRING
            @ATTRIBUTE repetition NUMERIC
            @ATTRIBUTE preprocessing NUMERIC
            @DATA
            inst_a,1,0.1
            inst_b,1,0.2
            inst_c,1,0.3
            inst_d,1,0.4
            """
        )
    )
    (tmp_path / "cv.arff").write_text(
        textwrap.dedent(
            """\
            @RELATION CV_TOY
            @ATTRIBUTE instance_id STRING
            @ATTRIBUTE repetition NUMERIC
            @ATTRIBUTE fold NUMERIC
            @DATA
            inst_a,1,1
            inst_b,1,2
            inst_c,1,1
            inst_d,1,2
            """
        )
    )
    return tmp_path
