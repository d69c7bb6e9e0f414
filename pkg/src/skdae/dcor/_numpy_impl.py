"""Pure-numpy kernels for the distance-correlation hot loops.

Used as the fallback when the compiled extension is unavailable, and as
the reference the compiled kernels are checked against.
"""

import numpy as np
from scipy.spatial.distance import cdist

NAME = "numpy"


def pairwise_distances(x):
    """Euclidean distance matrix of the rows of ``x`` (n x d, float64)."""
    d = cdist(x, x, metric="euclidean")
    np.fill_diagonal(d, 0.0)
    return d


def dcor_grad_accum(a_cent, b_cent, b_dist, y, coef_a, coef_b):
    """Accumulate the distance-correlation gradient with respect to ``y``.

    ``a_cent``/``b_cent`` are the double-centered distance matrices,
    ``b_dist`` the raw distances of ``y``.  Pairs with zero distance
    contribute nothing (subgradient convention for the norm).
    """
    w = np.zeros_like(b_dist)
    mask = b_dist > 0.0
    w[mask] = 2.0 * (coef_a * a_cent[mask] - coef_b * b_cent[mask]) / b_dist[mask]
    return w.sum(axis=1)[:, None] * y - w @ y
