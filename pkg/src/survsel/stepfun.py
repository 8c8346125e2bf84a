"""Right-continuous piecewise-constant functions over time.

A :class:`StepFunction` holds the value ``initial_value`` on ``[0, knots[0])``
and ``values[j]`` on ``[knots[j], knots[j+1])``.  Both cumulative hazard
functions (nondecreasing from 0) and survival functions (nonincreasing from 1)
are represented this way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError


@dataclass(frozen=True, eq=False)
class StepFunction:
    knots: np.ndarray
    values: np.ndarray
    initial_value: float

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or values.ndim != 1 or knots.shape != values.shape:
            raise ValueError("knots and values must be 1-D arrays of equal length")
        if knots.size and not np.all(np.diff(knots) > 0):
            raise ValueError("knots must be strictly increasing")
        knots.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "initial_value", float(self.initial_value))

    def __call__(self, t):
        """Evaluate at scalar or array ``t`` (right-continuous)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.knots, t, side="right")
        padded = np.concatenate(([self.initial_value], self.values))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            self.initial_value == other.initial_value
            and np.array_equal(self.knots, other.knots)
            and np.array_equal(self.values, other.values)
        )

    def drops(self):
        """Per-knot decrease ``value(t_j^-) - value(t_j)``.

        Positive entries are probability masses when the function is a
        survival function.
        """
        if self.knots.size == 0:
            return np.empty(0)
        before = np.concatenate(([self.initial_value], self.values[:-1]))
        return before - self.values


def constant(value: float) -> StepFunction:
    """Step function with no knots, identically ``value``."""
    return StepFunction(np.empty(0), np.empty(0), value)


def check_chf(h: StepFunction) -> None:
    """Raise :class:`InvariantError` unless ``h`` is a valid cumulative hazard."""
    if h.initial_value != 0.0:
        raise InvariantError("CHF must start at 0")
    if h.values.size and (h.values[0] < 0 or np.any(np.diff(h.values) < 0)):
        raise InvariantError("CHF values must be nondecreasing from 0")


def check_sf(s: StepFunction, tol: float = 1e-12) -> None:
    """Raise :class:`InvariantError` unless ``s`` is a valid survival function."""
    if s.initial_value != 1.0:
        raise InvariantError("SF must start at 1")
    if s.values.size:
        if np.any(s.values < -tol) or np.any(s.values > 1 + tol):
            raise InvariantError("SF values must lie in [0, 1]")
        if s.values[0] > s.initial_value + tol or np.any(np.diff(s.values) > tol):
            raise InvariantError("SF values must be nonincreasing")
