"""Synthetic scenarios with known ground-truth runtime distributions.

Used by oracle tests and the ``synth`` command: every (instance, algorithm)
runtime is sampled from a per-algorithm distribution, then clamped and
censored at the cutoff exactly as a real scenario would be.  The recipe object
holding the ground truth stays available to the caller, so derived
quantities (true survival curves, expected losses) can be checked against
model output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import stats

from .scenario import MIN_RUNTIME, Scenario

# Uncensored draws from discrete distributions get a uniform additive jitter
# of at most ATOM_JITTER * cutoff.  This makes event times pairwise distinct,
# which keeps survival-curve mass from piling onto a single tied knot, while
# shifting any expectation by less than 1e-6 * C.
ATOM_JITTER = 1e-6


@dataclass(frozen=True)
class TwoPoint:
    """Runtime t_fast with probability p_fast, otherwise t_slow.

    Atoms at or above the cutoff come out censored.  A deterministic
    algorithm is p_fast = 1.
    """

    p_fast: float
    t_fast: float
    t_slow: float = float("inf")

    def __post_init__(self):
        if not 0.0 <= self.p_fast <= 1.0:
            raise ValueError("p_fast must lie in [0, 1]")
        if self.t_fast <= 0 or self.t_slow <= 0:
            raise ValueError("atoms must be positive")

    discrete = True

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        fast = rng.random(n) < self.p_fast
        return np.where(fast, self.t_fast, self.t_slow)

    def sf(self, t) -> np.ndarray:
        """Ground-truth P(T > t)."""
        t = np.asarray(t, dtype=float)
        return 1.0 - self.p_fast * (t >= self.t_fast) - (1.0 - self.p_fast) * (t >= self.t_slow)


@dataclass(frozen=True)
class LogNormal:
    """log T ~ Normal(mu, sigma)."""

    mu: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    discrete = False

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.lognormal(self.mu, self.sigma, size=n)

    def sf(self, t) -> np.ndarray:
        return stats.lognorm.sf(np.asarray(t, dtype=float), s=self.sigma, scale=np.exp(self.mu))


@dataclass(frozen=True)
class Weibull:
    """Weibull with the given shape and scale; shape 1 is Exponential(1/scale)."""

    shape: float
    scale: float

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("shape and scale must be positive")

    discrete = False

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.scale * rng.weibull(self.shape, size=n)

    def sf(self, t) -> np.ndarray:
        return stats.weibull_min.sf(np.asarray(t, dtype=float), c=self.shape, scale=self.scale)


Distribution = Union[TwoPoint, LogNormal, Weibull]


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a sampled scenario.

    ``feature_model`` is "noise" (one constant feature plus one
    standard-normal noise feature, so selectors can only exploit marginal
    runtime distributions) or "linked" (a per-instance latent z scales every
    runtime by exp(link_strength * z) and is exposed as the first feature,
    giving models a real signal to regress on).
    """

    name: str
    algorithms: tuple[tuple[str, Distribution], ...]
    n_instances: int
    cutoff: float
    seed: int
    feature_model: str = "noise"
    link_strength: float = 0.5

    def __post_init__(self):
        if not self.algorithms:
            raise ValueError("need at least one algorithm")
        if self.n_instances < 1:
            raise ValueError("need at least one instance")
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.feature_model not in ("noise", "linked"):
            raise ValueError(f"unknown feature model {self.feature_model!r}")


def generate_synthetic(spec: SyntheticSpec) -> Scenario:
    """Sample a scenario; bit-reproducible for a fixed spec."""
    n = spec.n_instances
    C = spec.cutoff
    feat_rng = np.random.default_rng([spec.seed, 0xFEA7])
    if spec.feature_model == "linked":
        latent = feat_rng.standard_normal(n)
        multiplier = np.exp(spec.link_strength * latent)
        features = np.column_stack([latent, feat_rng.standard_normal(n)])
        feature_names = ("latent_scale", "noise")
    else:
        multiplier = np.ones(n)
        features = np.column_stack([np.ones(n), feat_rng.standard_normal(n)])
        feature_names = ("constant", "noise")

    runtimes = np.empty((n, len(spec.algorithms)))
    censored = np.empty((n, len(spec.algorithms)), dtype=bool)
    for j, (_, dist) in enumerate(spec.algorithms):
        rng = np.random.default_rng([spec.seed, 0xA160, j])
        t = dist.sample(rng, n) * multiplier
        if dist.discrete:
            below = t < C
            t = np.where(below, np.minimum(t + rng.random(n) * ATOM_JITTER * C, np.nextafter(C, 0.0)), t)
        cens = t > C
        runtimes[:, j] = np.clip(np.where(cens, C, t), MIN_RUNTIME, C)
        censored[:, j] = cens

    return Scenario(
        name=spec.name,
        algorithms=tuple(name for name, _ in spec.algorithms),
        instances=tuple(f"inst_{i:05d}" for i in range(n)),
        feature_names=feature_names,
        features=features,
        feature_costs=np.zeros(n),
        runtimes=runtimes,
        censored=censored,
        cutoff=float(C),
        folds=None,
    )


def risk_aversion_spec(n_instances: int = 2000, cutoff: float = 100.0, seed: int = 0,
                       p_fast: float = 0.85) -> SyntheticSpec:
    """Canonical two-algorithm construction contrasting mean and tail risk.

    A1 always finishes at 0.9 C.  A3 finishes at 0.1 C with probability
    p_fast and otherwise times out, so its expected runtime (0.235 C at the
    default) beats A1 while its expected PAR10 (1.585 C) is far worse.
    """
    return SyntheticSpec(
        name="two-point-risk",
        algorithms=(
            ("A1", TwoPoint(p_fast=1.0, t_fast=0.9 * cutoff)),
            ("A3", TwoPoint(p_fast=p_fast, t_fast=0.1 * cutoff, t_slow=2.0 * cutoff)),
        ),
        n_instances=n_instances,
        cutoff=cutoff,
        seed=seed,
    )
