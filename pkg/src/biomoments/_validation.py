"""Small argument and array validators used across the package."""
from __future__ import annotations

import math

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError


def check_positive(name, value):
    if value is None or not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_open_unit(name, value):
    if value is None or not 0.0 < value < 1.0:
        raise DomainError(f"{name} must lie strictly between 0 and 1, got {value!r}")
    return float(value)


def as_series(values, name="values") -> np.ndarray:
    """Validate a 1-D finite float array."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def as_timed_series(t, values) -> tuple:
    """Validate paired timestamp / value arrays; timestamps must be sorted."""
    t = as_series(t, "t")
    values = as_series(values, "values")
    if t.shape != values.shape:
        raise DomainError(f"t and values differ in length ({t.size} vs {values.size})")
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise DomainError("timestamps must be sorted ascending")
    return t, values


def as_matrix(X, min_rows=1) -> np.ndarray:
    """sklearn-style 2-D float validation with a readable error type."""
    try:
        return check_array(X, dtype=float, ensure_min_samples=min_rows)
    except ValueError as exc:
        raise DomainError(str(exc)) from None
