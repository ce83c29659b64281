"""Input validation helpers used by the estimators and explainers."""

import numpy as np

from .exceptions import InvalidArgumentError

MASK_VALUE = -1.0


def check_tensor(X, *, ndim=3, name="X"):
    """Return ``X`` as a float64 array with ``ndim`` axes, rejecting NaN/inf."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != ndim:
        raise InvalidArgumentError(f"{name} must have {ndim} dimensions, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return X


def check_binary_labels(y, n=None, name="y"):
    y = np.asarray(y)
    if y.ndim != 1:
        raise InvalidArgumentError(f"{name} must be one-dimensional")
    if n is not None and len(y) != n:
        raise InvalidArgumentError(f"{name} has length {len(y)}, expected {n}")
    if not np.isin(y, (0, 1)).all():
        raise InvalidArgumentError(f"{name} must only contain 0 and 1")
    return y.astype(np.int64)


def active_mask(x, mask_value=MASK_VALUE):
    """Boolean array marking entries that are not the mask sentinel."""
    return np.asarray(x) != mask_value


def check_unit_interval(x, mask_value=MASK_VALUE, name="instance"):
    x = np.asarray(x, dtype=np.float64)
    live = x[active_mask(x, mask_value)]
    if live.size and (live.min() < 0.0 or live.max() > 1.0):
        raise InvalidArgumentError(f"{name} has values outside [0, 1]")
    return x
