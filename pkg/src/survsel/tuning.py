"""Surrogate-loss search via sequential model-based optimization.

The survival models are fitted once on an inner-training split; every
candidate loss only changes the integration step, so re-scoring a candidate
costs one pass over precomputed validation survival curves.  Candidates are
proposed from a quasi-random initial design followed by expected-improvement
maximization under a regression-forest response surface over the encoded
(family, log-scaled parameters) space.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats
from scipy.stats import qmc

from . import losses as losses_mod
from . import survival
from .censoring import build_survival_dataset
from .forest import ForestParams, fit_forest, predict_regression_per_tree
from .losses import LossSpec
from .scenario import ScenarioView
from .seeding import derive_seed

log = logging.getLogger(__name__)

_POOL_SIZE = 128  # random candidates screened per proposal step


@dataclass(frozen=True)
class TuneBudget:
    n_evaluations: int = 50
    inner_validation_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_evaluations < 2:
            raise ValueError("need at least 2 evaluations")
        if not 0.0 < self.inner_validation_fraction < 1.0:
            raise ValueError("inner_validation_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class TuneResult:
    best: LossSpec
    trace: tuple[tuple[LossSpec, float], ...]  # (candidate, validation PAR10)
    degenerate: bool
    inner_train: tuple[str, ...]
    inner_validation: tuple[str, ...]


def _encode(spec: LossSpec) -> np.ndarray:
    """One-hot family plus log-scaled parameters (absent ones sit mid-range)."""
    a_lo, a_hi = losses_mod.POLY_ALPHA_RANGE
    la_lo, la_hi = losses_mod.CAPPED_LOG_ALPHA_RANGE
    b_lo, b_hi = losses_mod.CAPPED_LOG_BETA_RANGE
    beta_mid = math.sqrt(b_lo * b_hi)
    if spec.kind == "poly":
        return np.array([1.0, 0.0, math.log(spec.alpha), math.log(beta_mid)])
    return np.array([0.0, 1.0, math.log(spec.alpha), math.log(spec.beta)])


def _from_unit(u: np.ndarray) -> LossSpec:
    """Map a point of the unit cube to a candidate loss."""

    def geom(lo, hi, t):
        return math.exp(math.log(lo) + (math.log(hi) - math.log(lo)) * t)

    if u[0] < 0.5:
        return losses_mod.polynomial(geom(*losses_mod.POLY_ALPHA_RANGE, u[1]))
    return losses_mod.capped_log(
        geom(*losses_mod.CAPPED_LOG_ALPHA_RANGE, u[1]),
        geom(*losses_mod.CAPPED_LOG_BETA_RANGE, u[2]),
    )


def tune_surrogate(view: ScenarioView, budget: TuneBudget, params: ForestParams) -> TuneResult:
    """Pick the surrogate loss minimizing inner-validation mean PAR10."""
    n = view.n_instances
    if n < 2:
        raise ValueError("need at least 2 training instances to split off validation")
    rng = np.random.default_rng([budget.seed, 0x7013])
    n_val = min(n - 1, max(1, round(budget.inner_validation_fraction * n)))
    perm = rng.permutation(n)
    val_view = view.take(perm[:n_val])
    train_view = view.take(perm[n_val:])

    cutoff = view.cutoff
    models = [
        survival.fit(
            build_survival_dataset(view.scenario, alg, train_view.idx),
            params,
            seed=derive_seed(budget.seed, 0x5EED, j),
        )
        for j, alg in enumerate(view.algorithms)
    ]
    val_sfs = [survival.predict_survival_batch(m, val_view.features) for m in models]

    def validation_par10(loss: LossSpec) -> float:
        scores = np.empty((n_val, view.n_algorithms))
        for j, sfs in enumerate(val_sfs):
            memo: dict[int, float] = {}
            for i, sf in enumerate(sfs):
                key = id(sf)
                if key not in memo:
                    memo[key] = survival.expected_loss(sf, loss, cutoff)
                scores[i, j] = memo[key]
        chosen = np.argmin(scores, axis=1)
        rows = np.arange(n_val)
        charged = val_view.feature_costs + val_view.runtimes[rows, chosen]
        timed_out = val_view.censored[rows, chosen] | (charged > cutoff)
        return float(np.where(timed_out, 10.0 * cutoff, charged).mean())

    n_init = max(2, round(0.1 * budget.n_evaluations))
    n_init = min(n_init, budget.n_evaluations)
    sampler = qmc.Halton(d=3, scramble=True, seed=derive_seed(budget.seed, 0x4A17))
    candidates = [_from_unit(u) for u in sampler.random(n_init)]
    trace: list[tuple[LossSpec, float]] = [(c, validation_par10(c)) for c in candidates]

    surface_params = ForestParams(n_trees=50, min_uncensored_leaf=1)
    for step in range(budget.n_evaluations - n_init):
        encoded = np.stack([_encode(c) for c, _ in trace])
        scores = np.array([s for _, s in trace])
        surface = fit_forest(
            encoded, scores, "variance", surface_params, seed=derive_seed(budget.seed, 0xE1, step)
        )
        pool_rng = np.random.default_rng([budget.seed, 0x9001, step])
        pool = [_from_unit(u) for u in pool_rng.random((_POOL_SIZE, 3))]
        pool_enc = np.stack([_encode(c) for c in pool])
        per_tree = predict_regression_per_tree(surface, pool_enc)
        mu = per_tree.mean(axis=0)
        sigma = per_tree.std(axis=0)
        best_score = scores.min()
        ei = np.maximum(best_score - mu, 0.0)
        positive = sigma > 0
        z = (best_score - mu[positive]) / sigma[positive]
        ei[positive] = (best_score - mu[positive]) * scipy_stats.norm.cdf(z) + sigma[
            positive
        ] * scipy_stats.norm.pdf(z)
        chosen = pool[int(np.argmax(ei))]
        trace.append((chosen, validation_par10(chosen)))

    values = [s for _, s in trace]
    degenerate = len(set(values)) == 1
    if degenerate:
        log.warning("all %d candidates scored identically; keeping the first", len(values))
        best = trace[0][0]
    else:
        best = trace[int(np.argmin(values))][0]
    return TuneResult(
        best=best,
        trace=tuple(trace),
        degenerate=degenerate,
        inner_train=train_view.instance_ids,
        inner_validation=val_view.instance_ids,
    )


def write_trace_csv(result: TuneResult, path) -> None:
    """One row per evaluated candidate, in evaluation order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["candidate", "kind", "alpha", "beta", "validation_par10"])
        for spec, score in result.trace:
            w.writerow(
                [
                    str(spec),
                    spec.kind,
                    "" if spec.alpha is None else repr(spec.alpha),
                    "" if spec.beta is None else repr(spec.beta),
                    repr(score),
                ]
            )
