"""Run configuration: flat JSON documents, selector strings, env overrides.

A config file is a single flat JSON object of scalars and lists of scalars.
Selectors are compact strings, ``kind`` optionally followed by
``?key=value&key=value`` (keys: ``imputation``, ``loss``, ``k``,
``max_clusters``, ``label``), e.g. ``sunny?k=8&imputation=ignore``.
Distributions for synthetic scenarios use the same style:
``two-point:p_fast=0.85,t_fast=10,t_slow=200``, ``lognormal:mu=0,sigma=1``,
``weibull:shape=1,scale=2``.

Precedence, highest first: command-line flags, ``SURVSEL_<KEY>`` environment
variables, the config file, built-in defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .censoring import STRATEGY_KINDS, ImputationStrategy
from .errors import ConfigError
from .forest import ForestParams
from .losses import parse_loss
from .selectors import SELECTOR_KINDS, SelectorConfig
from .synthetic import Distribution, LogNormal, SyntheticSpec, TwoPoint, Weibull, risk_aversion_spec
from .tuning import TuneBudget

ENV_PREFIX = "SURVSEL_"

# key -> (python type, default); bool values in env vars are 0/1/true/false
_SCHEMA: dict[str, tuple[type, object]] = {
    "scenario": (str, None),
    "scenarios": (list, None),
    "selector": (str, None),
    "selectors": (list, None),
    "folds": (int, 10),
    "seed": (int, None),
    "out": (str, None),
    "jobs": (int, 1),
    "overwrite": (bool, False),
    "n_trees": (int, 100),
    "max_features": (float, None),
    "min_samples_leaf": (int, 1),
    "min_uncensored_leaf": (int, 3),
    "max_depth": (int, None),
    "bootstrap": (bool, True),
    "imputation": (str, None),
    "k_neighbors": (int, 16),
    "max_clusters": (int, 16),
    "tune_evaluations": (int, 50),
    "tune_validation_fraction": (float, 0.3),
    "name": (str, "synthetic"),
    "n_instances": (int, 2000),
    "cutoff": (float, 100.0),
    "preset": (str, None),
    "algorithms": (list, None),
    "feature_model": (str, "noise"),
    "link_strength": (float, 0.5),
}


@dataclass(frozen=True)
class RunConfig:
    values: dict = field(default_factory=dict)

    def get(self, key: str):
        if key not in _SCHEMA:
            raise KeyError(key)
        return self.values.get(key, _SCHEMA[key][1])

    @property
    def scenario_paths(self) -> list[str]:
        paths = []
        if self.get("scenario") is not None:
            paths.append(self.get("scenario"))
        if self.get("scenarios") is not None:
            paths.extend(self.get("scenarios"))
        return paths

    @property
    def selector_strings(self) -> list[str]:
        out = []
        if self.get("selector") is not None:
            out.append(self.get("selector"))
        if self.get("selectors") is not None:
            out.extend(self.get("selectors"))
        return out

    def forest_params(self) -> ForestParams:
        mf = self.get("max_features")
        if mf is not None and float(mf).is_integer() and float(mf) > 1:
            mf = int(mf)
        return ForestParams(
            n_trees=self.get("n_trees"),
            max_features_per_split=mf,
            min_samples_leaf=self.get("min_samples_leaf"),
            min_uncensored_leaf=self.get("min_uncensored_leaf"),
            max_depth=self.get("max_depth"),
            bootstrap=self.get("bootstrap"),
            seed=self.get("seed") or 0,
        )

    def tune_budget(self, seed: int) -> TuneBudget:
        return TuneBudget(
            n_evaluations=self.get("tune_evaluations"),
            inner_validation_fraction=self.get("tune_validation_fraction"),
            seed=seed,
        )


def _check_type(key: str, value, expected: type):
    if value is None:
        return None
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return value
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if expected is list:
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{key}: expected a list of strings, got {value!r}")
        return value
    raise AssertionError(expected)


def _parse_env_value(key: str, raw: str, expected: type):
    try:
        if expected is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes"):
                return True
            if lowered in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if expected is int:
            return int(raw)
        if expected is float:
            return float(raw)
        if expected is list:
            return [item.strip() for item in raw.split(",") if item.strip()]
        return raw
    except ValueError:
        raise ConfigError(f"{ENV_PREFIX}{key.upper()}: cannot parse {raw!r} as {expected.__name__}")


def load_run_config(
    config_path=None, env: dict | None = None, overrides: dict | None = None
) -> RunConfig:
    """Merge config file, environment and explicit overrides into a RunConfig."""
    values: dict = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        for key, value in raw.items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _check_type(key, value, _SCHEMA[key][0])
    env = os.environ if env is None else env
    for key, (expected, _) in _SCHEMA.items():
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            values[key] = _parse_env_value(key, env[env_key], expected)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = _check_type(key, value, _SCHEMA[key][0])
    return RunConfig(values)


def _parse_kv(text: str, context: str) -> dict[str, str]:
    out = {}
    if not text:
        return out
    for item in text.split("&"):
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"{context}: malformed option {item!r}")
        out[key.strip()] = value.strip()
    return out


def parse_selector(text: str, cfg: RunConfig, index: int | None = None) -> tuple[str, object]:
    """(label, SelectorConfig-or-"vbs") from a compact selector string."""
    context = "selector" if index is None else f"selectors[{index}]"
    kind, _, optpart = text.strip().partition("?")
    kind = kind.strip()
    opts = _parse_kv(optpart, context)
    label = opts.pop("label", text.strip())
    if kind == "vbs":
        if opts:
            raise ConfigError(f"{context}: vbs takes no options")
        return label, "vbs"
    if kind not in SELECTOR_KINDS:
        raise ConfigError(f"{context}: unknown selector kind {kind!r}")
    imputation = opts.pop("imputation", cfg.get("imputation"))
    if imputation is not None:
        if imputation not in STRATEGY_KINDS:
            raise ConfigError(f"{context}: unknown imputation {imputation!r}")
        imputation = ImputationStrategy(imputation)
    loss = opts.pop("loss", None)
    if loss is not None:
        try:
            loss = parse_loss(loss)
        except ValueError as exc:
            raise ConfigError(f"{context}: {exc}")
    try:
        k = int(opts.pop("k", cfg.get("k_neighbors")))
        max_clusters = int(opts.pop("max_clusters", cfg.get("max_clusters")))
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}")
    if opts:
        raise ConfigError(f"{context}: unknown options {sorted(opts)}")
    seed = cfg.get("seed") or 0
    try:
        selector = SelectorConfig(
            kind=kind,
            forest=cfg.forest_params(),
            imputation=imputation,
            loss=loss,
            k_neighbors=k,
            max_clusters=max_clusters,
            tune=cfg.tune_budget(seed) if kind == "survival-polylog" else None,
        )
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}")
    return label, selector


def parse_distribution(text: str, context: str) -> Distribution:
    family, _, parampart = text.strip().partition(":")
    params = {}
    for item in parampart.split(",") if parampart else []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"{context}: malformed distribution parameter {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"{context}: non-numeric parameter {item!r}")
    try:
        if family in ("two-point", "twopoint"):
            return TwoPoint(**params)
        if family == "lognormal":
            return LogNormal(**params)
        if family == "weibull":
            return Weibull(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: {exc}")
    raise ConfigError(f"{context}: unknown distribution family {family!r}")


def synthetic_spec_from_config(cfg: RunConfig, seed: int) -> SyntheticSpec:
    preset = cfg.get("preset")
    if preset is not None:
        if preset != "two-point-risk":
            raise ConfigError(f"preset: unknown preset {preset!r}")
        return risk_aversion_spec(
            n_instances=cfg.get("n_instances"), cutoff=cfg.get("cutoff"), seed=seed
        )
    entries = cfg.get("algorithms")
    if not entries:
        raise ConfigError("algorithms: required unless a preset is given")
    algorithms = []
    for i, entry in enumerate(entries):
        name, sep, dist_text = entry.partition("=")
        if not sep:
            raise ConfigError(f"algorithms[{i}]: expected 'name=distribution', got {entry!r}")
        algorithms.append((name.strip(), parse_distribution(dist_text, f"algorithms[{i}]")))
    try:
        return SyntheticSpec(
            name=cfg.get("name"),
            algorithms=tuple(algorithms),
            n_instances=cfg.get("n_instances"),
            cutoff=cfg.get("cutoff"),
            seed=seed,
            feature_model=cfg.get("feature_model"),
            link_strength=cfg.get("link_strength"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
