"""Hot pointwise kernels with a compiled core and a numpy fallback.

The compiled module ``_kernels`` is built from Cython when available; set
``CHOQUARD_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("CHOQUARD_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def nonlinear_terms(u: np.ndarray, p: float):
    """Pointwise ``|u|^p``, ``|u|^(p-2) u`` and ``(p-1)|u|^(p-2)``.

    For ``p > 2`` the last two vanish where ``u == 0``; at ``p = 2`` the last is
    identically 1. Output arrays have the shape of ``u``.
    """
    flat = np.ascontiguousarray(u, dtype=np.float64).ravel()
    a, b, c = _impl.nonlinear_terms(flat, float(p))
    return a.reshape(u.shape), b.reshape(u.shape), c.reshape(u.shape)


def weighted_sumsq(w: np.ndarray, c: np.ndarray) -> float:
    """``sum(w * |c|^2)`` over arrays of equal shape."""
    wf = np.ascontiguousarray(w, dtype=np.float64).ravel()
    cf = np.ascontiguousarray(c, dtype=np.complex128).ravel()
    return float(_impl.weighted_sumsq(wf, cf))


def use_backend(name: str) -> None:
    """Switch between ``"cython"`` and ``"python"`` at runtime (benchmarks, tests)."""
    global _impl, BACKEND
    if name == "python":
        _impl, BACKEND = _kernels_py, "python"
    elif name == "cython":
        from . import _kernels

        _impl, BACKEND = _kernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
