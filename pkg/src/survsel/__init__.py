"""Per-instance algorithm selection on right-censored runtime data.

Fits one random survival forest per algorithm, turns each predicted survival
curve into an expected surrogate loss, and picks the algorithm minimizing
that expectation.  Ships classical selector baselines, censoring-aware label
imputation, loss tuning, and cross-validated PAR10 evaluation over scenario
directories.
"""

from importlib import metadata as _metadata

from .censoring import (
    ImputationStrategy,
    SurvivalDataset,
    apply_imputation,
    build_survival_dataset,
    schmee_hahn,
)
from .errors import (
    AggregationError,
    ConfigError,
    ConsistencyError,
    DegenerateDataError,
    FormatError,
    InvariantError,
    SurvselError,
)
from .evaluation import EvaluationReport, aggregate, evaluate_selector
from .forest import Forest, ForestParams, fit_forest, load_forest, save_forest
from .losses import LossSpec, capped_log, identity, par10, parse_loss, polynomial, timeout_value
from .scenario import (
    Scenario,
    ScenarioView,
    compute_stats,
    load_scenario,
    make_folds,
    save_scenario_csv,
)
from .selectors import SELECTOR_KINDS, Selector, SelectorConfig, make_selector
from .stepfun import StepFunction
from .survival import SurvivalModel, expected_loss, nelson_aalen
from .synthetic import SyntheticSpec, generate_synthetic, risk_aversion_spec
from .tuning import TuneBudget, TuneResult, tune_surrogate

try:
    __version__ = _metadata.version("survsel")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "AggregationError",
    "ConfigError",
    "ConsistencyError",
    "DegenerateDataError",
    "EvaluationReport",
    "Forest",
    "ForestParams",
    "FormatError",
    "ImputationStrategy",
    "InvariantError",
    "LossSpec",
    "SELECTOR_KINDS",
    "Scenario",
    "ScenarioView",
    "Selector",
    "SelectorConfig",
    "StepFunction",
    "SurvivalDataset",
    "SurvivalModel",
    "SurvselError",
    "SyntheticSpec",
    "TuneBudget",
    "TuneResult",
    "aggregate",
    "apply_imputation",
    "build_survival_dataset",
    "capped_log",
    "compute_stats",
    "evaluate_selector",
    "expected_loss",
    "fit_forest",
    "generate_synthetic",
    "identity",
    "load_forest",
    "load_scenario",
    "make_folds",
    "make_selector",
    "nelson_aalen",
    "par10",
    "parse_loss",
    "polynomial",
    "risk_aversion_spec",
    "save_forest",
    "save_scenario_csv",
    "schmee_hahn",
    "timeout_value",
    "tune_surrogate",
]
