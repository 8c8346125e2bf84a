"""Per-algorithm survival datasets and censored-label treatments.

A scenario row (instance, algorithm) becomes a survival sample (x, y, delta)
with delta marking right-censoring at the cutoff.  Baseline selectors cannot
consume censored labels directly, so four treatments convert a survival
dataset into a plain regression dataset: dropping censored points, imputing
the cutoff, imputing the PAR10 penalty, or iteratively imputing
truncated-normal predictive means (Schmee & Hahn).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateDataError
from .features import MedianImputer
from .forest import Forest, ForestParams, fit_forest, predict_regression_per_tree
from .scenario import Scenario

log = logging.getLogger(__name__)

STRATEGY_KINDS = ("ignore", "cutoff", "par10", "schmee-hahn")


@dataclass(frozen=True)
class SurvivalSample:
    x: np.ndarray
    y: float
    delta: bool  # True = right-censored at the cutoff


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    X: np.ndarray  # (n, d); may contain NaN
    y: np.ndarray  # (n,) observed times in (0, C]
    censored: np.ndarray  # (n,) bool
    cutoff: float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        c = np.asarray(self.censored, dtype=bool)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("X must be a nonempty (n, d) matrix")
        if y.shape != (X.shape[0],) or c.shape != y.shape:
            raise ValueError("y and censored must be (n,) aligned with X")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if np.any(y <= 0) or np.any(y > self.cutoff):
            raise ValueError("observed times must lie in (0, cutoff]")
        if np.any(y[c] != self.cutoff):
            raise ValueError("censored samples must sit exactly at the cutoff")
        for name, arr in (("X", X), ("y", y), ("censored", c)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_uncensored(self) -> int:
        return int((~self.censored).sum())

    def sample(self, i: int) -> SurvivalSample:
        return SurvivalSample(x=self.X[i], y=float(self.y[i]), delta=bool(self.censored[i]))


@dataclass(frozen=True)
class ImputationStrategy:
    """One of ignore, cutoff, par10 or schmee-hahn (with iteration controls)."""

    kind: str
    max_iter: int = 10
    rel_tol: float = 1e-3

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown imputation strategy {self.kind!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")


def build_survival_dataset(s: Scenario, algorithm: str, train_instances) -> SurvivalDataset:
    """Survival dataset of one algorithm over the given training instances.

    ``train_instances`` is either an integer index array or an iterable of
    instance ids.  Missing feature values are imputed with the training-set
    medians here, so downstream fitting sees a complete matrix.
    """
    j = s.algorithm_index(algorithm) if isinstance(algorithm, str) else int(algorithm)
    idx = _instance_indices(s, train_instances)
    if idx.size == 0:
        raise ValueError("training instance set is empty")
    X = MedianImputer.fit(s.features[idx]).transform(s.features[idx])
    return SurvivalDataset(
        X=X, y=s.runtimes[idx, j], censored=s.censored[idx, j], cutoff=s.cutoff
    )


def _instance_indices(s: Scenario, instances) -> np.ndarray:
    arr = np.asarray(instances)
    if arr.dtype.kind in "iu":
        return arr.astype(int)
    return np.array([s.instance_index(i) for i in arr], dtype=int)


def apply_imputation(
    d: SurvivalDataset,
    strategy: ImputationStrategy,
    model_factory=None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Regression dataset (X, labels) according to the strategy.

    All strategies except ``ignore`` keep the input cardinality and order.
    """
    if strategy.kind == "ignore":
        keep = ~d.censored
        return d.X[keep], d.y[keep].copy()
    if strategy.kind == "cutoff":
        return d.X, np.where(d.censored, d.cutoff, d.y)
    if strategy.kind == "par10":
        return d.X, np.where(d.censored, 10.0 * d.cutoff, d.y)
    if model_factory is None:
        model_factory = forest_model_factory(ForestParams())
    return d.X, schmee_hahn(
        d, model_factory, max_iter=strategy.max_iter, rel_tol=strategy.rel_tol, seed=seed
    )


def schmee_hahn(
    d: SurvivalDataset,
    model_factory,
    max_iter: int = 10,
    rel_tol: float = 1e-3,
    seed: int = 0,
) -> np.ndarray:
    """Iteratively impute censored labels with truncated-normal means.

    Censored labels start at the cutoff; each round refits the regressor on
    all points (uncensored plus currently imputed), predicts (mu, sigma^2)
    at the censored points, and replaces their labels with the mean of
    Normal(mu, sigma^2) truncated below at the cutoff.  Stops when the
    largest relative label change falls below ``rel_tol``.  Every imputed
    label is >= cutoff.
    """
    if d.n_uncensored == 0:
        raise DegenerateDataError("Schmee-Hahn needs at least one uncensored sample")
    X = MedianImputer.fit(d.X).transform(d.X)
    labels = d.y.astype(float).copy()
    cens = d.censored
    if not cens.any():
        return labels
    labels[cens] = d.cutoff
    for it in range(max_iter):
        model = model_factory(X, labels, seed)
        mu, var = model.mean_variance(X[cens])
        sigma = np.sqrt(np.maximum(var, 0.0))
        new = np.where(
            sigma > 0,
            truncated_normal_mean_vec(mu, np.where(sigma > 0, sigma, 1.0), d.cutoff),
            np.maximum(mu, d.cutoff),
        )
        new = np.maximum(new, d.cutoff)
        change = float(np.max(np.abs(new - labels[cens]) / np.maximum(labels[cens], 1e-300)))
        labels[cens] = new
        if change < rel_tol:
            log.debug("schmee-hahn converged after %d iterations", it + 1)
            break
    return labels


def truncated_normal_mean(mu: float, sigma: float, lower: float) -> float:
    """Mean of Normal(mu, sigma^2) truncated below at ``lower``.

    Equals mu + sigma * phi(a) / (1 - Phi(a)) with a = (lower - mu) / sigma;
    evaluated through log densities so deep tails stay finite.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return float(truncated_normal_mean_vec(np.array([mu]), np.array([sigma]), lower)[0])


def truncated_normal_mean_vec(mu: np.ndarray, sigma: np.ndarray, lower: float) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    a = (lower - mu) / sigma
    # phi(a)/(1-Phi(a)) via logs; stable far into both tails
    ratio = np.exp(stats.norm.logpdf(a) - stats.norm.logsf(a))
    return mu + sigma * ratio


class _ForestRegressor:
    """Adapter exposing per-point predictive mean and tree-variance."""

    def __init__(self, forest: Forest):
        self.forest = forest

    def mean_variance(self, X) -> tuple[np.ndarray, np.ndarray]:
        per_tree = predict_regression_per_tree(self.forest, np.asarray(X, dtype=float))
        if per_tree.ndim == 1:
            per_tree = per_tree[:, np.newaxis]
        return per_tree.mean(axis=0), per_tree.var(axis=0)


def forest_model_factory(params: ForestParams):
    """Model factory for :func:`schmee_hahn` backed by a regression forest."""

    def make(X, y, seed):
        return _ForestRegressor(fit_forest(X, y, "variance", params, seed=seed))

    return make
