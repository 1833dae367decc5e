"""Small input-validation helpers in the spirit of sklearn.utils.validation."""
import numbers

import numpy as np

from .errors import ConfigError


def check_scalar(x, name, *, lo=None, hi=None, lo_open=False, hi_open=False):
    if not isinstance(x, numbers.Real) or isinstance(x, bool):
        raise ConfigError(f"{name} must be a real number, got {x!r}")
    x = float(x)
    if not np.isfinite(x):
        raise ConfigError(f"{name} must be finite, got {x}")
    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise ConfigError(f"{name}={x} out of range (lower bound {lo})")
    if hi is not None and (x > hi or (hi_open and x == hi)):
        raise ConfigError(f"{name}={x} out of range (upper bound {hi})")
    return x


def check_dim(dim):
    if not isinstance(dim, numbers.Integral) or dim < 1 or dim > 3:
        raise ConfigError(f"dimension must be 1, 2 or 3, got {dim!r}")
    return int(dim)


def as_points(xi, dim):
    """Coerce frequencies to shape (n, dim); returns (array, scalar_input)."""
    arr = np.asarray(xi, dtype=float)
    scalar = False
    if dim == 1:
        if arr.ndim == 0:
            scalar = True
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr[:, None]
        elif arr.ndim != 2 or arr.shape[1] != 1:
            raise ConfigError(f"expected 1-d frequencies, got shape {arr.shape}")
    else:
        if arr.ndim == 1 and arr.shape[0] == dim:
            scalar = True
            arr = arr[None, :]
        elif arr.ndim != 2 or arr.shape[1] != dim:
            raise ConfigError(f"expected frequencies of shape (n, {dim}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("frequencies must be finite")
    return arr, scalar


def check_increasing(x, name, *, strict=True, min_len=1):
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size < min_len:
        raise ConfigError(f"{name} needs at least {min_len} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite")
    d = np.diff(arr)
    if (strict and np.any(d <= 0)) or (not strict and np.any(d < 0)):
        raise ConfigError(f"{name} must be {'strictly ' if strict else ''}increasing")
    return arr
