"""Sample distance covariance / correlation and its gradient.

Rows of the input matrices are observations; columns are coordinates.
All statistics use the V-statistic (double-centered) formulation with
Euclidean distances by default, and accumulate in float64 regardless of
the input dtype.
"""

import math

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import (
    DegenerateGradientError,
    DegenerateSampleError,
    DimensionMismatchError,
    InvalidInputError,
)
from . import _backend

# dcov2 smaller than this counts as zero when forming quotients.
_TINY = 1e-300


def _as_sample_matrix(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-d sample matrix")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(x)


def pairwise_distance_matrix(x, p=2.0):
    """n x n matrix of p-norm distances between the rows of ``x``.

    Symmetric with a zero diagonal.  The Euclidean case runs through the
    selected kernel backend; other orders fall back to scipy.
    """
    x = _as_sample_matrix(x)
    if p < 1.0:
        raise InvalidInputError(f"norm order must be >= 1, got {p}")
    if p == 2.0:
        return _backend.pairwise_distances(x)
    d = cdist(x, x, metric="minkowski", p=p)
    np.fill_diagonal(d, 0.0)
    return d


def double_center(d):
    """Subtract row and column means and add back the grand mean.

    Input must be a symmetric distance-like matrix with a zero diagonal.
    Every row and column of the result sums to zero.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidInputError("expected a square matrix")
    if not np.all(np.isfinite(d)):
        raise InvalidInputError("matrix contains non-finite entries")
    scale = max(1.0, float(np.abs(d).max()))
    if np.abs(np.diagonal(d)).max(initial=0.0) > 1e-9 * scale:
        raise InvalidInputError("matrix diagonal is not zero")
    if np.abs(d - d.T).max() > 1e-9 * scale:
        raise InvalidInputError("matrix is not symmetric")
    row = d.mean(axis=1, keepdims=True)
    col = d.mean(axis=0, keepdims=True)
    grand = d.mean()
    return d - row - col + grand


def _centered_from_samples(x):
    return double_center(_backend.pairwise_distances(_as_sample_matrix(x)))


def _mean_product(a, b):
    n = a.shape[0]
    return float(np.sum(a * b)) / (n * n)


def dcov2(x, y):
    """Squared sample distance covariance of ``x`` and ``y``.

    Mean of the elementwise product of the two double-centered distance
    matrices.  Tiny negatives from round-off are clamped to zero.
    """
    x = _as_sample_matrix(x, "x")
    y = _as_sample_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"sample counts differ: {x.shape[0]} vs {y.shape[0]}"
        )
    a = double_center(_backend.pairwise_distances(x))
    b = double_center(_backend.pairwise_distances(y))
    return max(_mean_product(a, b), 0.0)


def dvar2(x):
    """Squared sample distance variance: ``dcov2(x, x)``."""
    a = _centered_from_samples(x)
    return max(_mean_product(a, a), 0.0)


def _dcor_from_stats(sxy, sxx, syy):
    denom2 = sxx * syy
    if denom2 <= 0.0:
        return 0.0
    r2 = sxy / math.sqrt(denom2)
    if r2 <= 0.0:
        return 0.0
    return min(math.sqrt(r2), 1.0)


def dcor(x, y):
    """Sample distance correlation of ``x`` and ``y``, in [0, 1].

    Zero when either argument has zero distance variance.  Requires at
    least two samples.
    """
    x = _as_sample_matrix(x, "x")
    y = _as_sample_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"sample counts differ: {x.shape[0]} vs {y.shape[0]}"
        )
    if x.shape[0] < 2:
        raise DegenerateSampleError("distance correlation needs at least 2 samples")
    a = double_center(_backend.pairwise_distances(x))
    b = double_center(_backend.pairwise_distances(y))
    return _dcor_from_stats(
        _mean_product(a, b), _mean_product(a, a), _mean_product(b, b)
    )


def dcor_with_gradient(x, y):
    """Distance correlation and its gradient with respect to ``y``.

    ``x`` is held constant.  Euclidean distances only.  The gradient
    chains through the distance matrix of ``y``: coincident rows get
    subgradient zero, and so does the non-differentiable point where the
    distance covariance vanishes.

    Returns ``(r, grad)`` with ``grad`` shaped like ``y``.
    """
    x = _as_sample_matrix(x, "x")
    y = _as_sample_matrix(y, "y")
    if x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"sample counts differ: {x.shape[0]} vs {y.shape[0]}"
        )
    n = x.shape[0]
    if n < 2:
        raise DegenerateSampleError("distance correlation needs at least 2 samples")
    b_dist = _backend.pairwise_distances(y)
    a = double_center(_backend.pairwise_distances(x))
    b = double_center(b_dist)
    sxx = _mean_product(a, a)
    syy = _mean_product(b, b)
    if sxx <= _TINY or syy <= _TINY:
        raise DegenerateGradientError(
            "zero distance variance: gradient undefined (skip the penalty)"
        )
    sxy = _mean_product(a, b)
    r = _dcor_from_stats(sxy, sxx, syy)
    if sxy <= _TINY or r == 0.0:
        # sqrt kink at dcor == 0: take subgradient 0.
        return r, np.zeros_like(y)
    coef_a = r / (2.0 * n * n * sxy)
    coef_b = r / (2.0 * n * n * syy)
    grad = _backend.dcor_grad_accum(a, b, b_dist, y, coef_a, coef_b)
    return r, grad


def dcor_gradient(x, y):
    """Gradient of ``dcor(x, y)`` with respect to every entry of ``y``."""
    return dcor_with_gradient(x, y)[1]
