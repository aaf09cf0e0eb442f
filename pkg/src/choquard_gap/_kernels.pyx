# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise kernels; see ``kernels.py`` for the dispatch."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()


def nonlinear_terms(double[::1] u, double p):
    """Return (|u|^p, sign(u)|u|^(p-1), (p-1)|u|^(p-2)) in one pass."""
    cdef Py_ssize_t i, n = u.shape[0]
    out_p = np.empty(n, dtype=np.float64)
    out_phi = np.empty(n, dtype=np.float64)
    out_dphi = np.empty(n, dtype=np.float64)
    cdef double[::1] up = out_p
    cdef double[::1] phi = out_phi
    cdef double[::1] dphi = out_dphi
    cdef double a, v, q
    cdef double pm1 = p - 1.0
    if p == 2.0:
        for i in range(n):
            v = u[i]
            up[i] = v * v
            phi[i] = v
            dphi[i] = 1.0
        return out_p, out_phi, out_dphi
    for i in range(n):
        v = u[i]
        a = fabs(v)
        if a == 0.0:
            up[i] = 0.0
            phi[i] = 0.0
            dphi[i] = 0.0
            continue
        q = pow(a, p - 2.0)
        up[i] = q * a * a
        phi[i] = q * v
        dphi[i] = pm1 * q
    return out_p, out_phi, out_dphi


def weighted_sumsq(double[::1] w, double complex[::1] c):
    """Sum of w[i] * |c[i]|^2 with a fixed left-to-right pairwise order."""
    cdef Py_ssize_t n = c.shape[0]
    return _pairwise(w, c, 0, n)


cdef double _pairwise(double[::1] w, double complex[::1] c, Py_ssize_t lo, Py_ssize_t hi):
    cdef Py_ssize_t i, mid
    cdef double acc = 0.0
    cdef double complex z
    if hi - lo <= 128:
        for i in range(lo, hi):
            z = c[i]
            acc += w[i] * (z.real * z.real + z.imag * z.imag)
        return acc
    mid = lo + (hi - lo) // 2
    return _pairwise(w, c, lo, mid) + _pairwise(w, c, mid, hi)
