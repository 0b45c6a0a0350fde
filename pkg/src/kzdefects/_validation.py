"""Small input checks shared by the estimators and the functional API."""

import numbers

import numpy as np


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_probability(value, name, upper=1.0):
    value = float(value)
    if not (0.0 <= value < upper) or not np.isfinite(value):
        raise ValueError(f"{name} must lie in [0, {upper}), got {value!r}")
    return value


def check_state_vector(psi, dim, normalized=True, atol=1e-8):
    """Return ``psi`` as a contiguous complex128 vector of length ``dim``."""
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    if psi.ndim != 1 or psi.shape[0] != dim:
        raise ValueError(f"state has shape {psi.shape}, expected ({dim},)")
    if normalized:
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > atol:
            raise ValueError(f"state is not normalized (norm={norm:.12g})")
    return psi


def check_1d(x, name, min_length=1, dtype=float):
    """Accept a 1-D array or an (n, 1) column, sklearn style."""
    x = np.asarray(x, dtype=dtype)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if x.shape[0] < min_length:
        raise ValueError(f"{name} needs at least {min_length} entries, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x
