"""JSON helpers: complex arrays as nested (re, im) pairs."""

from __future__ import annotations

import numpy as np


def complex_to_pairs(value):
    """Nested lists terminating in two-element [re, im] pairs."""
    arr = np.asarray(value, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [complex_to_pairs(sub) for sub in arr]


def complex_from_pairs(data) -> np.ndarray:
    """Inverse of :func:`complex_to_pairs`; returns a complex ndarray (0-d for scalars)."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise ValueError("expected nested [re, im] pairs")
    return np.asarray(arr[..., 0] + 1j * arr[..., 1])
