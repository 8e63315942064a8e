"""Input validation helpers shared by the estimators."""

import numbers

import numpy as np


class SchemaError(ValueError):
    """Raised when an input file does not match the expected layout."""


class SpacingError(ValueError):
    """Raised when timestamps cannot be mapped onto an equidistant grid."""


def check_scalar_int(value, name, *, min_val=None, max_val=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if min_val is not None and value < min_val:
        raise ValueError(f"{name} must be >= {min_val}, got {value}")
    if max_val is not None and value > max_val:
        raise ValueError(f"{name} must be <= {max_val}, got {value}")
    return value


def check_1d(x, name="x", *, min_length=1):
    """Return `x` as a finite float64 vector."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValueError(f"{name} needs at least {min_length} values, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_2d(X, name="X", *, min_rows=1):
    """Return `X` as a finite (n, d) float64 matrix; 1-D input becomes one column."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if arr.shape[1] < 1:
        raise ValueError(f"{name} needs at least one column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_subsequences(X, *, min_length=1):
    """Validate a ragged collection of subsequences.

    Each element may be a 1-D array (univariate) or a 2-D ``(length, d)``
    array; all elements must share the same number of channels.

    Returns
    -------
    list of ndarray
        Float64 arrays, each 2-D with shape ``(length, d)``.
    """
    if isinstance(X, np.ndarray) and X.ndim == 2 and X.dtype != object:
        items = list(X)
    else:
        items = list(X)
    if not items:
        raise ValueError("expected at least one subsequence")
    out = []
    n_channels = None
    for i, item in enumerate(items):
        arr = np.asarray(item, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"subsequence {i} must be 1-D or 2-D, got shape {arr.shape}")
        if arr.shape[0] < min_length:
            raise ValueError(
                f"subsequence {i} has length {arr.shape[0]}, minimum is {min_length}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"subsequence {i} contains NaN or Inf")
        if n_channels is None:
            n_channels = arr.shape[1]
        elif arr.shape[1] != n_channels:
            raise ValueError("all subsequences must have the same number of channels")
        out.append(arr)
    return out
