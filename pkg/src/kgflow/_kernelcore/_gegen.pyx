# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation of truncated Gegenbauer series.

Hot loop of kernel-matrix assembly: for every pairwise inner product
s = <x1, x2>/d we evaluate sum_k c_k q_k(s), where q_k is the degree-k
Gegenbauer polynomial rescaled to [-1, 1] and normalized so q_k(1) = 1,
via the three-term recurrence

    q_{k+1}(u) = ((2k + d - 2) u q_k(u) - k q_{k-1}(u)) / (k + d - 2).
"""
import numpy as np


def series_eval(const double[::1] s, const double[::1] coeffs, double d, double[::1] out):
    """Accumulate sum_k coeffs[k] * q_k(s[i]) into out[i] for every i."""
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t kmax = coeffs.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double u, qprev, qcur, qnext, acc
    if out.shape[0] != n:
        raise ValueError("output buffer size mismatch")
    with nogil:
        for i in range(n):
            u = s[i]
            qprev = 1.0
            acc = coeffs[0]
            if kmax >= 1:
                qcur = u
                acc += coeffs[1] * u
                for k in range(1, kmax):
                    qnext = ((2 * k + d - 2) * u * qcur - k * qprev) / (k + d - 2)
                    acc += coeffs[k + 1] * qnext
                    qprev = qcur
                    qcur = qnext
            out[i] = acc
    return np.asarray(out)
