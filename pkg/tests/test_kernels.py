import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from choquard_gap import _kernels_py, kernels

compiled = pytest.importorskip("choquard_gap._kernels")

finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(u=arrays(np.float64, st.integers(1, 200), elements=finite), p=st.floats(1.7, 4.0))
def test_backends_agree_nonlinear(u, p):
    a = compiled.nonlinear_terms(u, p)
    b = _kernels_py.nonlinear_terms(u, p)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-13, atol=0)


@settings(max_examples=60, deadline=None)
@given(w=arrays(np.float64, 50, elements=st.floats(0, 10)), re=arrays(np.float64, 50, elements=finite), im=arrays(np.float64, 50, elements=finite))
def test_backends_agree_sumsq(w, re, im):
    c = re + 1j * im
    assert compiled.weighted_sumsq(w, c) == pytest.approx(_kernels_py.weighted_sumsq(w, c), rel=1e-13, abs=1e-300)


def test_zero_entries():
    u = np.array([0.0, -2.0, 3.0])
    up, sg, d1 = kernels.nonlinear_terms(u, 2.0)
    assert np.array_equal(up, [0.0, 4.0, 9.0])
    assert np.array_equal(sg, [0.0, -2.0, 3.0])
    assert np.array_equal(d1, [1.0, 1.0, 1.0])
    up, sg, d1 = kernels.nonlinear_terms(u, 2.5)
    assert up[0] == 0.0 and sg[0] == 0.0 and d1[0] == 0.0
    assert d1[1] == pytest.approx(1.5 * 2**0.5)


def test_backend_switch():
    orig = kernels.BACKEND
    try:
        kernels.use_backend("python")
        assert kernels.BACKEND == "python"
        with pytest.raises(ValueError):
            kernels.use_backend("fortran")
    finally:
        kernels.use_backend(orig)
