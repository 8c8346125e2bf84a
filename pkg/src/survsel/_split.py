"""Compiled inner loop for log-rank split search.

The scan walks candidate split positions of one feature in sorted order,
moving samples into the left group one at a time while keeping per-event-time
counts incrementally updated.  At each admissible position it accumulates the
two-group log-rank statistic over the node's pooled event grid, so a full
feature scan costs O(n + n_admissible * K) for K distinct event times.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def logrank_scan(vals, pos, event_at, d_total, y_total, min_leaf, d0, n_unc):
    """Best log-rank split along one feature.

    vals: feature values sorted ascending (the node's samples in scan order).
    pos: per sample, number of pooled event times <= its observed time.
    event_at: per sample, index of its event time in the pooled grid, -1 if
        censored.
    d_total, y_total: per pooled event time, total events and at-risk counts.
    min_leaf, d0: minimum samples and minimum uncensored samples per child.
    n_unc: total uncensored samples in the node.

    Returns (best_statistic, best_position); position -1 means no admissible
    split with a positive statistic exists.  A split at position i sends
    samples 0..i left.
    """
    n = vals.shape[0]
    k = d_total.shape[0]
    left_pos_count = np.zeros(k + 1, dtype=np.int64)
    d_left = np.zeros(k, dtype=np.int64)
    unc_left = 0
    best = 0.0
    best_pos = -1
    for i in range(n - 1):
        left_pos_count[pos[i]] += 1
        e = event_at[i]
        if e >= 0:
            d_left[e] += 1
            unc_left += 1
        if vals[i] == vals[i + 1]:
            continue
        n_left = i + 1
        if n_left < min_leaf or n - n_left < min_leaf:
            continue
        if unc_left < d0 or n_unc - unc_left < d0:
            continue
        oe = 0.0
        var = 0.0
        acc = 0
        for j in range(k - 1, -1, -1):
            acc += left_pos_count[j + 1]
            yj = y_total[j]
            dj = d_total[j]
            frac = acc / yj
            oe += d_left[j] - dj * frac
            if yj > 1:
                var += dj * frac * (1.0 - frac) * (yj - dj) / (yj - 1.0)
        if var > 0.0:
            stat = oe * oe / var
            if stat > best:
                best = stat
                best_pos = i
    return best, best_pos
