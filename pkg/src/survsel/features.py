"""Feature preprocessing fitted on training data and replayed at query time.

All transforms here are stateless after fitting: they capture training
statistics (medians, means, ranges) and apply them to any later matrix, so
test instances are processed exactly like training instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _clean_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[np.newaxis, :] if X.ndim == 1 else X


@dataclass(frozen=True)
class MedianImputer:
    """Replace missing (NaN) entries by per-feature training medians."""

    medians: np.ndarray

    @classmethod
    def fit(cls, X) -> "MedianImputer":
        X = _clean_matrix(X)
        with np.errstate(all="ignore"):
            med = np.nanmedian(X, axis=0)
        # features missing on every training instance carry no signal
        return cls(medians=np.where(np.isnan(med), 0.0, med))

    def transform(self, X) -> np.ndarray:
        X = _clean_matrix(X).copy()
        nan_rows, nan_cols = np.nonzero(np.isnan(X))
        X[nan_rows, nan_cols] = self.medians[nan_cols]
        return X


@dataclass(frozen=True)
class ZScorer:
    """Standardize to zero mean and unit variance per feature."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "ZScorer":
        X = _clean_matrix(X)
        std = X.std(axis=0)
        return cls(mean=X.mean(axis=0), std=np.where(std > 0, std, 1.0))

    def transform(self, X) -> np.ndarray:
        return (_clean_matrix(X) - self.mean) / self.std


@dataclass(frozen=True)
class RangeScaler:
    """Scale each feature to [-1, 1] from training min/max.

    Constant features map to 0; query values outside the training range land
    outside [-1, 1], which keeps distances monotone rather than clipping.
    """

    low: np.ndarray
    high: np.ndarray

    @classmethod
    def fit(cls, X) -> "RangeScaler":
        X = _clean_matrix(X)
        return cls(low=X.min(axis=0), high=X.max(axis=0))

    def transform(self, X) -> np.ndarray:
        X = _clean_matrix(X)
        span = self.high - self.low
        safe = np.where(span > 0, span, 1.0)
        centered = (X - self.low) / safe * 2.0 - 1.0
        return np.where(span > 0, centered, 0.0)
