"""Brute-force distance-covariance oracle.

Expands the V-statistic into explicit sums over sample indices, computed
with plain Python loops and scalar arithmetic.  Deliberately shares no
code with the matrix formulation in :mod:`skdae.dcor.core`; it exists to
verify that path and is O(n^3), so keep n small.
"""

import math

import numpy as np


def _rows(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return [list(map(float, row)) for row in x]


def _dist(u, v):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v)))


def dcov2_bruteforce(x, y):
    """Squared distance covariance via the expanded triple/quadruple sums.

    ``(1/n^2) sum a_kl b_kl + abar bbar - (2/n^3) sum_klm a_kl b_km``
    where the bars are grand means over all index pairs.
    """
    xs, ys = _rows(x), _rows(y)
    n = len(xs)
    if len(ys) != n:
        raise ValueError("sample counts differ")
    a = [[_dist(xs[k], xs[l]) for l in range(n)] for k in range(n)]
    b = [[_dist(ys[k], ys[l]) for l in range(n)] for k in range(n)]

    s1 = 0.0
    for k in range(n):
        for l in range(n):
            s1 += a[k][l] * b[k][l]
    s1 /= n * n

    sum_a = sum(sum(row) for row in a)
    sum_b = sum(sum(row) for row in b)
    s2 = (sum_a / (n * n)) * (sum_b / (n * n))

    s3 = 0.0
    for k in range(n):
        for l in range(n):
            for m in range(n):
                s3 += a[k][l] * b[k][m]
    s3 /= n * n * n

    return s1 + s2 - 2.0 * s3


def dcor_bruteforce(x, y):
    """Distance correlation assembled from brute-force covariances."""
    sxy = dcov2_bruteforce(x, y)
    sxx = dcov2_bruteforce(x, x)
    syy = dcov2_bruteforce(y, y)
    denom2 = sxx * syy
    if denom2 <= 0.0:
        return 0.0
    r2 = sxy / math.sqrt(denom2)
    if r2 <= 0.0:
        return 0.0
    return min(math.sqrt(r2), 1.0)
