"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InvalidParameterError


def check_features(X, name="features"):
    """Return ``X`` as a finite 2-D float array with at least one column."""
    try:
        X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    except ValueError as exc:
        raise InvalidParameterError(f"{name}: {exc}") from exc
    return X


def check_signal(f, n, name="signal"):
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != n:
        raise InvalidParameterError(
            f"{name} must be a vector of length {n}, got shape {f.shape}"
        )
    return f


def check_positive(value, name, integer=False):
    if integer:
        if not isinstance(value, numbers.Integral) or isinstance(value, bool):
            raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
    elif not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}")
    if not np.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be positive, got {value!r}")
    return value


def check_indices(indices, n, name="indices"):
    """Distinct integer node indices in ``[0, n)``, as an int array."""
    idx = np.asarray(indices)
    if idx.ndim != 1:
        raise InvalidParameterError(f"{name} must be one-dimensional")
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        raise InvalidParameterError(f"{name} must contain integers")
    idx = idx.astype(np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise InvalidParameterError(f"{name} must lie in [0, {n})")
    if np.unique(idx).size != idx.size:
        raise InvalidParameterError(f"{name} must be distinct")
    return idx
