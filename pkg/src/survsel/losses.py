"""Target and surrogate loss functions over runtimes.

All losses are nondecreasing on ``[0, C]``.  The polynomial and capped-log
families operate on the normalized runtime ``u = t / C`` and are convex,
which is what makes selections under them risk-averse: probability mass near
the cutoff is weighted disproportionately against mass at short runtimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Tuner search ranges per family (log-scaled during optimization).
POLY_ALPHA_RANGE = (0.5, 30.0)
CAPPED_LOG_ALPHA_RANGE = (0.01, 1.0)
CAPPED_LOG_BETA_RANGE = (0.5, 20.0)

# Below this distance from u = 1 the log term is treated as past the cap.
_LOG_SINGULARITY_GUARD = 1e-12


@dataclass(frozen=True)
class LossSpec:
    """One of identity, par10, poly(alpha) or log(alpha, beta)."""

    kind: str
    alpha: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "par10", "poly", "log"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "poly":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("poly loss requires alpha > 0")
        elif self.kind == "log":
            if self.alpha is None or not (0 < self.alpha <= 1):
                raise ValueError("log loss requires alpha in (0, 1]")
            if self.beta is None or self.beta <= 0:
                raise ValueError("log loss requires beta > 0")
        elif self.alpha is not None or self.beta is not None:
            raise ValueError(f"{self.kind} loss takes no parameters")

    def __str__(self):
        if self.kind == "poly":
            return f"poly:alpha={self.alpha:g}"
        if self.kind == "log":
            return f"log:alpha={self.alpha:g},beta={self.beta:g}"
        return self.kind


def identity() -> LossSpec:
    return LossSpec("identity")


def par10() -> LossSpec:
    return LossSpec("par10")


def polynomial(alpha: float) -> LossSpec:
    return LossSpec("poly", alpha=alpha)


def capped_log(alpha: float, beta: float) -> LossSpec:
    return LossSpec("log", alpha=alpha, beta=beta)


def parse_loss(text: str) -> LossSpec:
    """Parse a config string such as ``par10``, ``poly:alpha=3`` or
    ``log:alpha=0.2,beta=4``."""
    text = text.strip()
    kind, _, argpart = text.partition(":")
    kind = kind.strip().lower()
    params = {}
    if argpart:
        for item in argpart.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ValueError(f"malformed loss parameter {item!r} in {text!r}")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise ValueError(f"non-numeric loss parameter {item!r} in {text!r}")
    if kind in ("identity", "exp"):
        spec = LossSpec("identity")
    elif kind == "par10":
        spec = LossSpec("par10")
    elif kind in ("poly", "polynomial"):
        spec = LossSpec("poly", alpha=params.pop("alpha", None))
    elif kind in ("log", "cappedlog", "capped_log"):
        spec = LossSpec("log", alpha=params.pop("alpha", None), beta=params.pop("beta", None))
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    leftovers = set(params) - ({"alpha", "beta"} if kind.startswith(("poly", "log", "capped")) else set())
    if leftovers or (spec.kind in ("identity", "par10") and params):
        raise ValueError(f"unexpected loss parameters {sorted(params)} for {kind!r}")
    return spec


def timeout_value(spec: LossSpec, cutoff: float) -> float:
    """Loss charged to the residual mass still unsolved at the cutoff."""
    if spec.kind == "identity":
        return cutoff
    if spec.kind == "par10":
        return 10.0 * cutoff
    if spec.kind == "poly":
        return 1.0
    return spec.beta


def evaluate_grid(spec: LossSpec, t, cutoff: float):
    """Vectorized :func:`evaluate` over an array of finished runtimes."""
    t = np.asarray(t, dtype=float)
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    if t.size and (t.min() < 0 or t.max() > cutoff):
        raise ValueError(f"runtimes outside [0, {cutoff}]")
    if spec.kind in ("identity", "par10"):
        return t.copy()
    u = t / cutoff
    if spec.kind == "poly":
        return u**spec.alpha
    out = np.full(u.shape, spec.beta)
    safe = 1.0 - u >= _LOG_SINGULARITY_GUARD
    out[safe] = np.minimum(-spec.alpha * np.log1p(-u[safe]), spec.beta)
    return out


def evaluate(spec: LossSpec, t: float, cutoff: float, timed_out: bool = False) -> float:
    """Loss of a run that finished at time ``t`` (or hit the cutoff).

    ``t`` must lie in ``[0, C]``; the normalized families evaluate
    ``u = t / C``.  A timed-out run is charged the per-loss timeout value
    regardless of ``t``.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    if timed_out:
        return timeout_value(spec, cutoff)
    if t < 0 or t > cutoff:
        raise ValueError(f"runtime {t} outside [0, {cutoff}]")
    if spec.kind == "identity":
        return t
    if spec.kind == "par10":
        return t
    u = t / cutoff
    if spec.kind == "poly":
        return u**spec.alpha
    # capped log; the min-cap engages before the log singularity at u = 1
    if 1.0 - u < _LOG_SINGULARITY_GUARD:
        return spec.beta
    return min(-spec.alpha * math.log1p(-u), spec.beta)
