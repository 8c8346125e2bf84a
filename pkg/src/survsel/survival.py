"""Random survival forest with Nelson-Aalen leaf estimators.

One model per algorithm: trees are grown with log-rank splits on the
right-censored runtime data, each leaf stores the Nelson-Aalen cumulative
hazard of its training samples, and a prediction averages the leaf hazards
reached by the query point before converting to a survival function.  The
expected loss of running the algorithm is then a discrete sum over the
survival function's probability masses plus a timeout term for the residual
mass at the cutoff.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import stepfun
from .censoring import SurvivalDataset
from .errors import InvariantError
from .features import MedianImputer
from .forest import Forest, ForestParams, fit_forest, leaf_indices
from .losses import LossSpec, evaluate_grid, timeout_value
from .stepfun import StepFunction

log = logging.getLogger(__name__)

# Ensemble evaluation grids larger than this are thinned uniformly; bounds
# memory when many deep trees contribute distinct knots.
MAX_GRID_SIZE = 10_000

# Probability-mass bookkeeping: deviations of total mass from 1 up to
# _MASS_TOL are accepted silently, up to _MASS_RENORM_TOL renormalized with a
# log message, beyond that rejected as an invariant violation.
_MASS_TOL = 1e-9
_MASS_RENORM_TOL = 1e-6


def nelson_aalen(times, censored) -> StepFunction:
    """Nelson-Aalen cumulative hazard of one group of survival samples.

    CHF(t) = sum over distinct uncensored event times t_i <= t of d_i / Y_i,
    with d_i the uncensored count at t_i and Y_i the number still at risk
    (observed time >= t_i).  An all-censored group yields the zero hazard.
    """
    times = np.asarray(times, dtype=float)
    censored = np.asarray(censored, dtype=bool)
    if times.size == 0:
        raise ValueError("need at least one sample")
    events = ~censored
    if not events.any():
        return stepfun.constant(0.0)
    grid, d = np.unique(times[events], return_counts=True)
    at_risk = times.size - np.searchsorted(np.sort(times), grid, side="left")
    return StepFunction(grid, np.cumsum(d / at_risk), 0.0)


def chf_to_survival(h: StepFunction) -> StepFunction:
    """SF(t) = exp(-CHF(t)) pointwise on the same knots."""
    return StepFunction(h.knots, np.exp(-h.values), float(np.exp(-h.initial_value)))


@dataclass(frozen=True)
class SurvivalModel:
    forest: Forest
    leaf_chfs: tuple[tuple[StepFunction | None, ...], ...]  # per tree, per node
    cutoff: float
    event_grid: np.ndarray  # observed uncensored times plus the cutoff
    imputer: MedianImputer

    @property
    def n_features(self) -> int:
        return self.forest.n_features


def fit(d: SurvivalDataset, params: ForestParams, seed: int | None = None) -> SurvivalModel:
    """Fit the per-algorithm survival forest and precompute leaf hazards."""
    if d.n_uncensored == 0:
        log.warning(
            "no uncensored samples: survival model degenerates to SF = 1 up to the cutoff"
        )
    imputer = MedianImputer.fit(d.X)
    X = imputer.transform(d.X)
    forest = fit_forest(X, d.y, "logrank", params, censored=d.censored, seed=seed)
    leaf_chfs = []
    for tree in forest.trees:
        per_node: list[StepFunction | None] = [None] * tree.n_nodes
        for node in np.nonzero(tree.feature < 0)[0]:
            members = tree.leaf_members[node]
            per_node[node] = nelson_aalen(d.y[members], d.censored[members])
        leaf_chfs.append(tuple(per_node))
    grid = np.unique(np.append(d.y[~d.censored], d.cutoff))
    return SurvivalModel(
        forest=forest,
        leaf_chfs=tuple(leaf_chfs),
        cutoff=d.cutoff,
        event_grid=grid,
        imputer=imputer,
    )


def _ensemble_sf(model: SurvivalModel, leaves: np.ndarray) -> StepFunction:
    """Mean of the selected per-tree leaf CHFs, converted to an SF."""
    chfs = [model.leaf_chfs[t][leaf] for t, leaf in enumerate(leaves)]
    knot_arrays = [h.knots for h in chfs if h.knots.size]
    knot_arrays.append(np.array([model.cutoff]))
    grid = np.unique(np.concatenate(knot_arrays))
    grid = grid[grid <= model.cutoff]
    if grid.size > MAX_GRID_SIZE:
        keep = np.round(np.linspace(0, grid.size - 1, MAX_GRID_SIZE)).astype(int)
        grid = grid[np.unique(keep)]
    mean_h = np.zeros(grid.size)
    for h in chfs:
        mean_h += h(grid)
    mean_h /= len(chfs)
    return StepFunction(grid, np.exp(-mean_h), 1.0)


def predict_survival(model: SurvivalModel, x: np.ndarray) -> StepFunction:
    """Survival step function for one feature vector."""
    return predict_survival_batch(model, np.asarray(x, dtype=float)[np.newaxis, :])[0]


def predict_survival_batch(model: SurvivalModel, X: np.ndarray) -> list[StepFunction]:
    """Survival functions for each row of ``X``.

    Rows reaching the same leaf in every tree share one ensemble
    computation, which is the common case on coarse trees.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected feature dimension {model.n_features}, got {X.shape}")
    X = model.imputer.transform(X)
    leaf_mat = np.stack([leaf_indices(tree, X) for tree in model.forest.trees])
    combos, inverse = np.unique(leaf_mat, axis=1, return_inverse=True)
    unique_sfs = [_ensemble_sf(model, combos[:, u]) for u in range(combos.shape[1])]
    return [unique_sfs[inverse[i]] for i in range(X.shape[0])]


def expected_loss(sf: StepFunction, loss: LossSpec, cutoff: float) -> float:
    """E[loss(T)] under the step survival function.

    Sums loss(t_j) * p_j over the knots at or below the cutoff, where p_j is
    the survival drop at t_j, and charges the loss's timeout value to the
    residual mass still surviving at the last such knot.  Total mass is
    checked against 1 (see module tolerances).
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    stepfun.check_sf(sf)
    within = sf.knots <= cutoff
    knots = sf.knots[within]
    drops = sf.drops()[within] if knots.size else np.empty(0)
    residual = sf.values[within][-1] if knots.size else sf.initial_value
    total = float(drops.sum() + residual)
    err = abs(total - 1.0)
    if err > _MASS_RENORM_TOL:
        raise InvariantError(f"survival mass sums to {total}, too far from 1")
    if err > _MASS_TOL:
        log.warning("renormalizing survival mass %.12f to 1", total)
        drops = drops / total
        residual = residual / total
    value = float(evaluate_grid(loss, knots, cutoff) @ drops) if knots.size else 0.0
    return value + timeout_value(loss, cutoff) * residual
