"""Pure-numpy fallback for the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def nonlinear_terms(u, p):
    if p == 2.0:
        return u * u, u.copy(), np.ones_like(u)
    a = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(a > 0.0, a ** (p - 2.0), 0.0)
    return q * a * a, q * u, (p - 1.0) * q


def weighted_sumsq(w, c):
    # numpy's contiguous sum is pairwise and order-stable
    return float(np.sum(w * (c.real * c.real + c.imag * c.imag)))
