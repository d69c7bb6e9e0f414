"""Shared numerical test utilities."""

import numpy as np


def central_difference_gradient(f, x, h=1e-6):
    """Entrywise central finite differences of a scalar function of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def max_relative_error(approx, exact, floor=1e-10):
    """Max absolute difference scaled by the magnitude of ``exact``."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    scale = max(float(np.abs(exact).max()), floor)
    return float(np.abs(approx - exact).max()) / scale
