# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_core_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def tri_solve(head, tail, Py_ssize_t m, double a, double b, rhs):
    cdef double[:, ::1] H = np.ascontiguousarray(head, dtype=np.float64)
    cdef double[::1] T = np.ascontiguousarray(tail, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = r.shape[0]
    out = np.empty(n)
    cdef double[::1] x = out
    cdef Py_ssize_t i, j, mm
    cdef double acc, diag
    for i in range(n):
        acc = 0.0
        mm = m if m < i else i
        for j in range(mm):
            acc += H[i, j] * x[j]
        for j in range(m, i):
            acc += T[i - j] * x[j]
        if i < m:
            diag = H[i, i]
        else:
            diag = T[0]
        x[i] = (r[i] - b * acc) / (a + b * diag)
    return out


def toeplitz_inverse(c):
    cdef double[::1] cc = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = cc.shape[0]
    out = np.empty(n)
    cdef double[::1] d = out
    cdef Py_ssize_t p, q
    cdef double acc
    cdef double c0 = cc[0]
    d[0] = 1.0 / c0
    for p in range(1, n):
        acc = 0.0
        for q in range(1, p + 1):
            acc += cc[q] * d[p - q]
        d[p] = -acc / c0
    return out
