"""Deterministic derivation of component seeds from a master seed."""

from __future__ import annotations

import numpy as np


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of integers.

    Components (per-fold, per-algorithm, per-pair seeds) are derived rather
    than shared so that fitting order and parallel schedules cannot change
    any random stream.
    """
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])
