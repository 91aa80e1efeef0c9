"""Input validation helpers shared by the estimators, inference, and CLI layers."""
from __future__ import annotations

import numpy as np


class DataError(ValueError):
    """Raised when input data violate a precondition (empty, malformed, degenerate)."""


class NumericalError(RuntimeError):
    """Raised when a computation cannot proceed (singular design, failed resampling)."""


def as_1d_float(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def as_2d_float(X, name: str = "X") -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    return arr


def drop_incomplete_rows(X, y, groups=None):
    """Drop rows with a missing response or any missing covariate.

    Returns ``(X, y, groups, n_dropped)``. ``groups`` passes through as an
    object array (or None). Non-finite (infinite) entries in the kept rows are
    rejected: missingness is NaN, infinity is a data error.
    """
    X = as_2d_float(X, "X")
    y = as_1d_float(y, "y")
    if y.shape[0] != X.shape[0]:
        raise DataError(
            f"X and y disagree on sample size ({X.shape[0]} vs {y.shape[0]})"
        )
    if groups is not None:
        groups = np.asarray(groups)
        if groups.shape[0] != X.shape[0]:
            raise DataError("groups must have one label per row")
    keep = ~(np.isnan(X).any(axis=1) | np.isnan(y))
    n_dropped = int((~keep).sum())
    X, y = X[keep], y[keep]
    if groups is not None:
        groups = groups[keep]
    if y.size == 0:
        raise DataError("empty response vector")
    if not np.isfinite(X).all():
        raise DataError("covariates must be finite")
    if not np.isfinite(y).all():
        raise DataError("responses must be finite")
    return X, y, groups, n_dropped
