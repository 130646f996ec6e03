# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the closed-form score fields.

The mixture score is the inner loop of sampling with empirical fields
(every integrator step evaluates it for every trajectory), so it gets a
fused single-allocation implementation here.  The numpy fallback in
``_core_py`` computes the same quantity.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def mixture_score(double[:, ::1] points, double[:, ::1] queries,
                  double signal, double var, double[:, ::1] out):
    """Score of sum_i N(x; signal*points_i, var*I) at each query row.

    Log-space softmax weights with max subtraction; accumulation runs in
    ascending component index for every query, matching the fallback.
    """
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t nq = queries.shape[0]
    cdef Py_ssize_t b, i, k
    cdef double inv2v = -0.5 / var
    cdef double sq, diff, m, wsum, w
    cdef double[::1] logw = np.empty(n, dtype=np.float64)
    cdef double[::1] acc = np.empty(d, dtype=np.float64)

    for b in range(nq):
        m = -1e300
        for i in range(n):
            sq = 0.0
            for k in range(d):
                diff = queries[b, k] - signal * points[i, k]
                sq += diff * diff
            logw[i] = sq * inv2v
            if logw[i] > m:
                m = logw[i]
        wsum = 0.0
        for k in range(d):
            acc[k] = 0.0
        for i in range(n):
            w = exp(logw[i] - m)
            wsum += w
            for k in range(d):
                acc[k] += w * points[i, k]
        for k in range(d):
            out[b, k] = (signal * acc[k] / wsum - queries[b, k]) / var
    return np.asarray(out)
