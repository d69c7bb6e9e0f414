# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the distance-correlation hot loops.

Single-threaded by design so results are reproducible run to run.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "compiled"


def pairwise_distances(double[:, ::1] x):
    """Euclidean distance matrix of the rows of ``x``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double s, diff
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                diff = x[i, k] - x[j, k]
                s += diff * diff
            s = sqrt(s)
            o[i, j] = s
            o[j, i] = s
    return out


def dcor_grad_accum(double[:, ::1] a_cent, double[:, ::1] b_cent,
                    double[:, ::1] b_dist, double[:, ::1] y,
                    double coef_a, double coef_b):
    """Accumulate the distance-correlation gradient with respect to ``y``.

    Zero-distance pairs contribute nothing (subgradient convention).
    """
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t q = y.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, q), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t k, l, j
    cdef double w, diff
    for k in range(n):
        for l in range(k + 1, n):
            if b_dist[k, l] <= 0.0:
                continue
            w = 2.0 * (coef_a * a_cent[k, l] - coef_b * b_cent[k, l]) / b_dist[k, l]
            for j in range(q):
                diff = w * (y[k, j] - y[l, j])
                o[k, j] += diff
                o[l, j] -= diff
    return out
