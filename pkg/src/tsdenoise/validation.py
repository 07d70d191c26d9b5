"""Small input-validation helpers shared by the public API surface."""

from __future__ import annotations

import numpy as np

from .exceptions import BadParams, EmptyInput, ShapeMismatch


def as_float_vector(x, name: str = "x", min_len: int = 1) -> np.ndarray:
    """Coerce to a 1-D float64 array, rejecting empty or non-finite input."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeMismatch(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < min_len:
        raise EmptyInput(f"{name} needs at least {min_len} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise BadParams(f"{name} contains non-finite values")
    return arr


def as_float_matrix(x, name: str = "X", width: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 array, optionally enforcing the column count."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyInput(f"{name} has no rows")
    if width is not None and arr.shape[1] != width:
        raise ShapeMismatch(f"{name} must have {width} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise BadParams(f"{name} contains non-finite values")
    return arr


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not value > 0:
        raise BadParams(f"{name} must be > 0, got {value}")
    return value


def check_nonnegative(value: float, name: str) -> float:
    value = float(value)
    if value < 0:
        raise BadParams(f"{name} must be >= 0, got {value}")
    return value


def check_in_open_interval(value: float, lo: float, hi: float, name: str) -> float:
    value = float(value)
    if not lo < value < hi:
        raise BadParams(f"{name} must lie in ({lo}, {hi}), got {value}")
    return value


def check_fraction(value: float, name: str, *, closed_right: bool = True) -> float:
    """Validate a value in (0, 1] (or (0, 1) when closed_right=False)."""
    value = float(value)
    ok = 0 < value <= 1 if closed_right else 0 < value < 1
    if not ok:
        bracket = "(0, 1]" if closed_right else "(0, 1)"
        raise BadParams(f"{name} must lie in {bracket}, got {value}")
    return value


def check_int_at_least(value: int, lo: int, name: str) -> int:
    ivalue = int(value)
    if ivalue != value or ivalue < lo:
        raise BadParams(f"{name} must be an integer >= {lo}, got {value}")
    return ivalue
