"""Input validation helpers shared by the numerical modules and the CLI."""
from __future__ import annotations

import numbers

import numpy as np


def check_delta(delta, allow_zero=False):
    """Return ``delta`` as a float, rejecting non-finite, negative or zero loss."""
    if isinstance(delta, (bool, np.bool_)) or not isinstance(delta, (numbers.Real, np.floating)):
        raise TypeError(f"delta must be a real number, got {type(delta).__name__}")
    delta = float(delta)
    if not np.isfinite(delta):
        raise ValueError(f"delta must be finite, got {delta}")
    if delta < 0 or (delta == 0 and not allow_zero):
        raise ValueError(f"delta must be strictly positive, got {delta}")
    return delta


def check_delta_grid(deltas):
    """Strictly positive, strictly decreasing loss grid as a float array."""
    d = np.asarray(deltas, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("delta grid must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("delta grid entries must be finite and strictly positive")
    if d.size > 1 and np.any(np.diff(d) >= 0):
        raise ValueError("delta grid must be strictly decreasing")
    return d


def check_points(x):
    """Array of planar points with shape (m, 2)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError(f"points must have shape (m, 2), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return x


def check_point(y):
    y = np.asarray(y, dtype=float)
    if y.shape != (2,) or not np.all(np.isfinite(y)):
        raise ValueError(f"expected a finite 2-vector, got {y!r}")
    return y


def check_density_stack(g, size):
    """Stacked density vector (or matrix of column densities) of a given length."""
    g = np.asarray(g)
    if g.ndim not in (1, 2) or g.shape[0] != size:
        raise ValueError(f"density must have leading dimension {size}, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("density contains non-finite values")
    return g


def check_density_pair(phi_i, phi_e, sizes):
    ni, ne = sizes
    phi_i, phi_e = np.asarray(phi_i), np.asarray(phi_e)
    if phi_i.shape[0] != ni or phi_e.shape[0] != ne:
        raise ValueError(f"density sizes {(phi_i.shape[0], phi_e.shape[0])} do not match {sizes}")
    return phi_i, phi_e


def check_positive(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")
    return float(value)
