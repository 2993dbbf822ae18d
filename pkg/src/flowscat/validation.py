"""Small input-validation helpers shared by the estimators."""

import numpy as np

from .errors import DimensionMismatch


def as_float_matrix(X, name="X"):
    """Coerce to a 2-D float64 array, rejecting anything else."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    return arr


def check_finite(X, name="X"):
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_width(X, expected, name="X"):
    if X.shape[1] != expected:
        raise DimensionMismatch(
            f"{name} has {X.shape[1]} columns, expected {expected}"
        )
    return X


def check_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted (missing {attribute})"
        )
