"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .errors import DomainError


def check_index(value, name, minimum=0):
    """Return ``value`` as a Python int, requiring ``value >= minimum``."""
    if isinstance(value, bool) or not isinstance(value, (numbers.Integral, np.integer)):
        if isinstance(value, (numbers.Real, np.floating)) and float(value).is_integer():
            value = int(value)
        else:
            raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_real(value, name, low=None, high=None, low_open=False, high_open=False):
    """Return ``value`` as a float inside the (optionally open) interval."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    if low is not None and (value < low or (low_open and value == low)):
        raise DomainError(f"{name}={value} is below the allowed range")
    if high is not None and (value > high or (high_open and value == high)):
        raise DomainError(f"{name}={value} is above the allowed range")
    return value


def check_probability(value, name, open_left=False, open_right=False):
    return check_real(value, name, 0.0, 1.0, open_left, open_right)


def check_prob_vector(p, name="p", tol=1e-12):
    """Validate a nonnegative vector whose entries sum to at most ``1 + tol``."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise DomainError(f"{name} has negative entries")
    if arr.sum() > 1.0 + tol:
        raise DomainError(f"{name} has total mass {arr.sum()!r} > 1")
    return arr


def check_grid(grid, name="grid"):
    """Validate a non-empty list of ``(n, ell)`` pairs with ``n >= 0, ell >= 0``."""
    pairs = [(check_index(n, f"{name}.n"), check_index(ell, f"{name}.ell")) for n, ell in grid]
    if not pairs:
        raise DomainError(f"{name} is empty")
    return pairs
