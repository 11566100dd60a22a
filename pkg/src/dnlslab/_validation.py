"""Small argument checks shared across modules."""

from __future__ import annotations

import math

import numpy as np


class HypothesisError(ValueError):
    """Model parameters violate the hypotheses a run mode relies on."""


def check_positive(name: str, value, *, strict: bool = True) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")
    return value


def check_multiple(name: str, value: float, step: float, *, rtol: float = 1e-9) -> int:
    """Return ``value / step`` if it is an integer up to ``rtol``, else raise."""
    ratio = value / step
    k = round(ratio)
    if k < 1 or abs(ratio - k) > rtol * max(1.0, abs(ratio)):
        raise ValueError(f"{name}={value} is not a positive integer multiple of {step}")
    return int(k)


def check_samples(grid, samples) -> np.ndarray:
    """Coerce ``samples`` to a complex array shaped like ``grid``.

    A flat array of the right length is reshaped, which lets estimators
    accept one row of a 2-D design matrix.
    """
    arr = np.asarray(samples, dtype=complex)
    if arr.shape != grid.shape:
        if arr.size == grid.size:
            arr = arr.reshape(grid.shape)
        else:
            raise ValueError(
                f"expected {grid.size} samples for grid shape {grid.shape}, got shape {arr.shape}"
            )
    if not np.all(np.isfinite(arr)):
        raise ValueError("samples contain NaN or inf")
    return arr


def is_odd_integer(p: float) -> bool:
    return float(p).is_integer() and int(p) % 2 == 1
