"""Per-instance algorithm selection strategies.

Every selector follows the same contract: ``fit`` on a training view, then
``select``/``score`` on query feature vectors, where scores are
per-algorithm values with lower meaning better and ties resolved toward the
lowest algorithm index.  The survival selectors score by expected surrogate
loss under per-algorithm survival forests; the baselines consume imputed
regression labels.
"""

from __future__ import annotations

import abc
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from . import losses as losses_mod
from . import survival
from . import tuning
from .censoring import (
    ImputationStrategy,
    SurvivalDataset,
    apply_imputation,
    build_survival_dataset,
    forest_model_factory,
    schmee_hahn,
)
from .errors import DegenerateDataError
from .features import MedianImputer, RangeScaler, ZScorer
from .forest import ForestParams, fit_forest, predict_class_probs, predict_regression
from .losses import LossSpec
from .scenario import ScenarioView
from .seeding import derive_seed

log = logging.getLogger(__name__)

SELECTOR_KINDS = (
    "survival-exp",
    "survival-par10",
    "survival-polylog",
    "survival-fixed",
    "regressor",
    "multiclass",
    "sunny",
    "isac",
    "satzilla11",
    "sbs",
)

# Per-baseline default censoring treatment (the empirically strongest one).
DEFAULT_IMPUTATION = {
    "regressor": "cutoff",
    "multiclass": "cutoff",
    "sunny": "cutoff",
    "satzilla11": "cutoff",
    "isac": "par10",
}


@dataclass(frozen=True)
class SelectorConfig:
    kind: str
    forest: ForestParams = field(default_factory=ForestParams)
    imputation: ImputationStrategy | None = None  # None = per-kind default
    loss: LossSpec | None = None  # survival-fixed only
    k_neighbors: int = 16
    max_clusters: int = 16
    tune: tuning.TuneBudget | None = None  # survival-polylog only

    def __post_init__(self):
        if self.kind not in SELECTOR_KINDS:
            raise ValueError(f"unknown selector kind {self.kind!r}")
        if self.kind == "survival-fixed" and self.loss is None:
            raise ValueError("survival-fixed requires an explicit loss")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be at least 1")
        if self.max_clusters < 1:
            raise ValueError("max_clusters must be at least 1")


# -- reference quantities --------------------------------------------------


def par10_label_matrix(runtimes: np.ndarray, censored: np.ndarray, cutoff: float) -> np.ndarray:
    """Per-cell PAR10 labels: runtime if solved, 10C if censored."""
    return np.where(censored, 10.0 * cutoff, runtimes)


def sbs_index(view: ScenarioView) -> int:
    """Algorithm with the lowest mean training PAR10 (ties: lowest index)."""
    means = par10_label_matrix(view.runtimes, view.censored, view.cutoff).mean(axis=0)
    return int(np.argmin(means))


def sbs_ranks(view: ScenarioView) -> np.ndarray:
    """0-based rank per algorithm by mean training PAR10 (ties: lowest index)."""
    means = par10_label_matrix(view.runtimes, view.censored, view.cutoff).mean(axis=0)
    order = np.argsort(means, kind="stable")
    ranks = np.empty(len(order), dtype=int)
    ranks[order] = np.arange(len(order))
    return ranks


def vbs_choices(runtimes: np.ndarray, censored: np.ndarray) -> np.ndarray:
    """Per-instance truly fastest algorithm, preferring uncensored runs."""
    effective = np.where(censored, np.inf, runtimes)
    return np.argmin(effective, axis=1)


def imputed_label_matrix(
    view: ScenarioView, strategy: ImputationStrategy, params: ForestParams, seed: int
) -> np.ndarray:
    """(n, m) regression labels; cells dropped by ``ignore`` become +inf."""
    C = view.cutoff
    if strategy.kind == "ignore":
        return np.where(view.censored, np.inf, view.runtimes)
    if strategy.kind == "cutoff":
        return np.where(view.censored, C, view.runtimes)
    if strategy.kind == "par10":
        return par10_label_matrix(view.runtimes, view.censored, C)
    X = MedianImputer.fit(view.features).transform(view.features)
    factory = forest_model_factory(params)
    cols = []
    for j in range(view.n_algorithms):
        d = SurvivalDataset(X=X, y=view.runtimes[:, j], censored=view.censored[:, j], cutoff=C)
        try:
            cols.append(
                schmee_hahn(
                    d,
                    factory,
                    max_iter=strategy.max_iter,
                    rel_tol=strategy.rel_tol,
                    seed=derive_seed(seed, 0x5A, j),
                )
            )
        except DegenerateDataError:
            log.warning(
                "algorithm %s has no uncensored runs; imputing the cutoff instead",
                view.algorithms[j],
            )
            cols.append(np.full(view.n_instances, C))
    return np.column_stack(cols)


def _masked_column_means(labels: np.ndarray) -> np.ndarray:
    """Column means over finite entries; all-dropped columns give +inf."""
    finite = np.isfinite(labels)
    counts = finite.sum(axis=0)
    sums = np.where(finite, labels, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.inf)


# -- selector interface ----------------------------------------------------


class Selector(abc.ABC):
    """fit(view, seed) once, then score/select on feature vectors."""

    kind: str = "?"

    def __init__(self):
        self._algorithms: tuple[str, ...] | None = None

    @property
    def algorithms(self) -> tuple[str, ...]:
        if self._algorithms is None:
            raise RuntimeError("selector has not been fitted")
        return self._algorithms

    def fit(self, view: ScenarioView, seed: int) -> "Selector":
        self._algorithms = view.algorithms
        self._fit(view, seed)
        return self

    @abc.abstractmethod
    def _fit(self, view: ScenarioView, seed: int) -> None: ...

    @abc.abstractmethod
    def score_batch(self, X: np.ndarray) -> np.ndarray:
        """(n, n_algorithms) scores, lower = better."""

    def score(self, x: np.ndarray) -> np.ndarray:
        return self.score_batch(np.asarray(x, dtype=float)[np.newaxis, :])[0]

    def select_batch(self, X: np.ndarray) -> np.ndarray:
        """Chosen algorithm index per row (argmin score, lowest index wins)."""
        return np.argmin(self.score_batch(X), axis=1)

    def select(self, x: np.ndarray) -> str:
        return self.algorithms[int(np.argmin(self.score(x)))]


class SurvivalSelector(Selector):
    """Expected surrogate loss under per-algorithm survival forests."""

    def __init__(self, loss: LossSpec, params: ForestParams):
        super().__init__()
        self.kind = {"identity": "survival-exp", "par10": "survival-par10"}.get(
            loss.kind, "survival-fixed"
        )
        self.loss = loss
        self.params = params
        self._models: list[survival.SurvivalModel] = []
        self._cutoff = 0.0

    def _fit(self, view: ScenarioView, seed: int) -> None:
        self._cutoff = view.cutoff
        self._models = [
            survival.fit(
                build_survival_dataset(view.scenario, alg, view.idx),
                self.params,
                seed=derive_seed(seed, 0xA1, j),
            )
            for j, alg in enumerate(view.algorithms)
        ]

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        scores = np.empty((X.shape[0], len(self._models)))
        for j, model in enumerate(self._models):
            sfs = survival.predict_survival_batch(model, X)
            memo: dict[int, float] = {}
            for i, sf in enumerate(sfs):
                key = id(sf)
                if key not in memo:
                    memo[key] = survival.expected_loss(sf, self.loss, self._cutoff)
                scores[i, j] = memo[key]
        return scores


class TunedSurvivalSelector(Selector):
    """Survival selector whose loss is chosen by inner-split optimization."""

    kind = "survival-polylog"

    def __init__(self, params: ForestParams, budget: tuning.TuneBudget | None = None):
        super().__init__()
        self.params = params
        self.budget = budget or tuning.TuneBudget()
        self.tune_result: tuning.TuneResult | None = None
        self._inner: SurvivalSelector | None = None

    def _fit(self, view: ScenarioView, seed: int) -> None:
        budget = tuning.TuneBudget(
            n_evaluations=self.budget.n_evaluations,
            inner_validation_fraction=self.budget.inner_validation_fraction,
            seed=derive_seed(seed, 0x7B),
        )
        self.tune_result = tuning.tune_surrogate(view, budget, self.params)
        self._inner = SurvivalSelector(self.tune_result.best, self.params)
        self._inner.fit(view, seed)

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return self._inner.score_batch(X)


class PerAlgorithmRegressor(Selector):
    """One regression forest per algorithm on imputed runtime labels."""

    kind = "regressor"

    def __init__(self, strategy: ImputationStrategy, params: ForestParams):
        super().__init__()
        self.strategy = strategy
        self.params = params
        self._forests = []
        self._imputer: MedianImputer | None = None
        self._fallback_score = 0.0

    def _fit(self, view: ScenarioView, seed: int) -> None:
        self._imputer = MedianImputer.fit(view.features)
        X = self._imputer.transform(view.features)
        self._fallback_score = 10.0 * view.cutoff
        factory = forest_model_factory(self.params)
        self._forests = []
        for j in range(view.n_algorithms):
            d = SurvivalDataset(
                X=X, y=view.runtimes[:, j], censored=view.censored[:, j], cutoff=view.cutoff
            )
            try:
                Xj, labels = apply_imputation(
                    d, self.strategy, model_factory=factory, seed=derive_seed(seed, 0x21, j)
                )
            except DegenerateDataError:
                Xj, labels = X[:0], np.empty(0)
            if labels.size == 0:
                log.warning(
                    "algorithm %s has no usable training labels; scoring it as a timeout",
                    view.algorithms[j],
                )
                self._forests.append(None)
                continue
            self._forests.append(
                fit_forest(Xj, labels, "variance", self.params, seed=derive_seed(seed, 0x22, j))
            )

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._imputer.transform(X)
        scores = np.empty((X.shape[0], len(self._forests)))
        for j, forest in enumerate(self._forests):
            scores[:, j] = (
                self._fallback_score if forest is None else predict_regression(forest, X)
            )
        return scores


class MultiClassSelector(Selector):
    """Classification forest on per-instance best-algorithm labels."""

    kind = "multiclass"

    def __init__(self, strategy: ImputationStrategy, params: ForestParams):
        super().__init__()
        self.strategy = strategy
        self.params = params
        self._forest = None
        self._imputer: MedianImputer | None = None
        self._n_algorithms = 0

    def _fit(self, view: ScenarioView, seed: int) -> None:
        self._imputer = MedianImputer.fit(view.features)
        X = self._imputer.transform(view.features)
        self._n_algorithms = view.n_algorithms
        labels_mat = imputed_label_matrix(view, self.strategy, self.params, seed)
        usable = np.isfinite(labels_mat).any(axis=1)
        if not usable.any():
            log.warning("no training instance has a usable label; selecting algorithm 0")
            self._forest = None
            return
        y = np.argmin(labels_mat[usable], axis=1)
        self._forest = fit_forest(
            X[usable],
            y,
            "gini",
            self.params,
            n_classes=view.n_algorithms,
            seed=derive_seed(seed, 0x31),
        )

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._imputer.transform(X)
        if self._forest is None:
            scores = np.ones((X.shape[0], self._n_algorithms))
            scores[:, 0] = 0.0
            return scores
        return -predict_class_probs(self._forest, X)


class SunnySelector(Selector):
    """k-nearest-neighbour mean of imputed labels on z-scored features."""

    kind = "sunny"

    def __init__(self, strategy: ImputationStrategy, params: ForestParams, k: int = 16):
        super().__init__()
        self.strategy = strategy
        self.params = params
        self.k = k
        self._imputer: MedianImputer | None = None
        self._scaler: ZScorer | None = None
        self._train_z: np.ndarray | None = None
        self._labels: np.ndarray | None = None
        self._k_eff = k

    def _fit(self, view: ScenarioView, seed: int) -> None:
        self._imputer = MedianImputer.fit(view.features)
        X = self._imputer.transform(view.features)
        self._scaler = ZScorer.fit(X)
        self._train_z = self._scaler.transform(X)
        self._labels = imputed_label_matrix(view, self.strategy, self.params, seed)
        self._k_eff = self.k
        if self.k > view.n_instances:
            log.warning(
                "k=%d exceeds the %d training instances; clamping", self.k, view.n_instances
            )
            self._k_eff = view.n_instances

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        Q = self._scaler.transform(self._imputer.transform(X))
        T = self._train_z
        d2 = (Q * Q).sum(axis=1)[:, None] + (T * T).sum(axis=1)[None, :] - 2.0 * (Q @ T.T)
        neighbors = np.argsort(d2, axis=1, kind="stable")[:, : self._k_eff]
        picked = self._labels[neighbors]  # (n_query, k, m)
        finite = np.isfinite(picked)
        counts = finite.sum(axis=1)
        sums = np.where(finite, picked, 0.0).sum(axis=1)
        with np.errstate(invalid="ignore"):
            return np.where(counts > 0, sums / np.maximum(counts, 1), np.inf)


class IsacSelector(Selector):
    """Cluster-based selection: g-means clusters, best mean label per cluster."""

    kind = "isac"

    def __init__(self, strategy: ImputationStrategy, params: ForestParams, max_clusters: int = 16):
        super().__init__()
        self.strategy = strategy
        self.params = params
        self.max_clusters = max_clusters
        self._imputer: MedianImputer | None = None
        self._scaler: RangeScaler | None = None
        self._centroids: np.ndarray | None = None
        self._cluster_scores: np.ndarray | None = None

    def _fit(self, view: ScenarioView, seed: int) -> None:
        self._imputer = MedianImputer.fit(view.features)
        X = self._imputer.transform(view.features)
        self._scaler = RangeScaler.fit(X)
        Xs = self._scaler.transform(X)
        min_size = max(2, 2 * view.scenario.n_features)
        self._centroids, assignment = _gmeans(Xs, self.max_clusters, min_size)
        labels = imputed_label_matrix(view, self.strategy, self.params, seed)
        rows = []
        for c in range(self._centroids.shape[0]):
            members = assignment == c
            rows.append(_masked_column_means(labels[members]))
        self._cluster_scores = np.stack(rows)

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        Q = self._scaler.transform(self._imputer.transform(X))
        C = self._centroids
        d2 = (Q * Q).sum(axis=1)[:, None] + (C * C).sum(axis=1)[None, :] - 2.0 * (Q @ C.T)
        return self._cluster_scores[np.argmin(d2, axis=1)]


def _principal_split(P: np.ndarray):
    """Initialize two children along the principal component, refine by
    alternating assignment and centroid updates; deterministic."""
    center = P.mean(axis=0)
    centered = P - center
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] <= 0:
        return None
    v = vt[0]
    lam = svals[0] ** 2 / P.shape[0]
    delta = v * math.sqrt(2.0 * lam / math.pi)
    c1, c2 = center + delta, center - delta
    assign = None
    for _ in range(100):
        d1 = ((P - c1) ** 2).sum(axis=1)
        d2 = ((P - c2) ** 2).sum(axis=1)
        new_assign = d1 <= d2
        if new_assign.all() or not new_assign.any():
            return None
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        c1 = P[assign].mean(axis=0)
        c2 = P[~assign].mean(axis=0)
    return c1, c2, assign


def _gmeans(X: np.ndarray, max_clusters: int, min_size: int):
    """Split clusters whose principal projection fails a Gaussianity test
    (Anderson-Darling at the 5% level), subject to size and count caps."""
    queue = [np.arange(X.shape[0])]
    final: list[np.ndarray] = []
    while queue:
        idx = queue.pop(0)
        n_current = len(queue) + len(final) + 1
        if n_current >= max_clusters or idx.size < max(8, 2 * min_size):
            final.append(idx)
            continue
        split = _principal_split(X[idx])
        if split is None:
            final.append(idx)
            continue
        c1, c2, assign = split
        direction = c1 - c2
        norm = np.linalg.norm(direction)
        if norm == 0 or assign.sum() < min_size or (~assign).sum() < min_size:
            final.append(idx)
            continue
        projected = X[idx] @ (direction / norm)
        result = scipy_stats.anderson(projected, dist="norm")
        if result.statistic < result.critical_values[2]:  # Gaussian at 5%: keep whole
            final.append(idx)
            continue
        queue.append(idx[assign])
        queue.append(idx[~assign])
    centroids = np.stack([X[idx].mean(axis=0) for idx in final])
    assignment = np.empty(X.shape[0], dtype=int)
    for c, idx in enumerate(final):
        assignment[idx] = c
    return centroids, assignment


class SatzillaSelector(Selector):
    """Cost-sensitive pairwise voting with weighted classification forests."""

    kind = "satzilla11"

    def __init__(self, strategy: ImputationStrategy, params: ForestParams):
        super().__init__()
        self.strategy = strategy
        self.params = params
        self._imputer: MedianImputer | None = None
        self._pair_forests: dict[tuple[int, int], object] = {}
        self._ranks: np.ndarray | None = None
        self._n_algorithms = 0

    def _fit(self, view: ScenarioView, seed: int) -> None:
        self._imputer = MedianImputer.fit(view.features)
        X = self._imputer.transform(view.features)
        m = view.n_algorithms
        self._n_algorithms = m
        par10 = par10_label_matrix(view.runtimes, view.censored, view.cutoff)
        labels = imputed_label_matrix(view, self.strategy, self.params, seed)
        self._ranks = sbs_ranks(view)
        self._pair_forests = {}
        for a in range(m):
            for b in range(a + 1, m):
                weights = np.abs(par10[:, a] - par10[:, b])
                keep = weights > 0
                if not keep.any():
                    continue  # the pair is indistinguishable on this training set
                y = (labels[keep, a] > labels[keep, b]).astype(int)  # 1 = b wins
                self._pair_forests[(a, b)] = fit_forest(
                    X[keep],
                    y,
                    "gini",
                    self.params,
                    weights=weights[keep],
                    n_classes=2,
                    seed=derive_seed(seed, 0x5B, a, b),
                )

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        X = self._imputer.transform(X)
        wins = np.zeros((X.shape[0], self._n_algorithms))
        for (a, b), forest in self._pair_forests.items():
            probs = predict_class_probs(forest, X)
            a_wins = probs[:, 0] >= probs[:, 1]
            wins[:, a] += a_wins
            wins[:, b] += ~a_wins
        # ties in wins fall back to the better training-PAR10 rank
        return -wins + self._ranks / (10.0 * self._n_algorithms)


class SingleBestSelector(Selector):
    """Constant selector: the algorithm with best mean training PAR10."""

    kind = "sbs"

    def __init__(self):
        super().__init__()
        self._means: np.ndarray | None = None

    def _fit(self, view: ScenarioView, seed: int) -> None:
        self._means = par10_label_matrix(view.runtimes, view.censored, view.cutoff).mean(axis=0)

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return np.tile(self._means, (np.asarray(X).shape[0], 1))


def make_selector(config: SelectorConfig) -> Selector:
    """Instantiate an unfitted selector from its configuration."""
    strategy = config.imputation
    if strategy is None and config.kind in DEFAULT_IMPUTATION:
        strategy = ImputationStrategy(DEFAULT_IMPUTATION[config.kind])
    if config.kind == "survival-exp":
        return SurvivalSelector(losses_mod.identity(), config.forest)
    if config.kind == "survival-par10":
        return SurvivalSelector(losses_mod.par10(), config.forest)
    if config.kind == "survival-fixed":
        return SurvivalSelector(config.loss, config.forest)
    if config.kind == "survival-polylog":
        return TunedSurvivalSelector(config.forest, config.tune)
    if config.kind == "regressor":
        return PerAlgorithmRegressor(strategy, config.forest)
    if config.kind == "multiclass":
        return MultiClassSelector(strategy, config.forest)
    if config.kind == "sunny":
        return SunnySelector(strategy, config.forest, k=config.k_neighbors)
    if config.kind == "isac":
        return IsacSelector(strategy, config.forest, max_clusters=config.max_clusters)
    if config.kind == "satzilla11":
        return SatzillaSelector(strategy, config.forest)
    if config.kind == "sbs":
        return SingleBestSelector()
    raise ValueError(f"unknown selector kind {config.kind!r}")
