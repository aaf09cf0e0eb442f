import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from choquard_gap.grid import (
    GridMismatchError,
    PotentialSpec,
    cell_view,
    gradient,
    gradient_sq_integral,
    h1_norm,
    integrate,
    inverse_transform,
    irtransform,
    l2_inner,
    l2_norm,
    laplacian,
    make_grid,
    read_snapshot,
    rtransform,
    sample_potential,
    shift_cells,
    transform,
    write_snapshot,
)


def test_grid_geometry():
    g = make_grid(3, 4, 8)
    assert g.L == 4.0 and g.side == 32 and g.shape == (32, 32, 32) and g.n == 32**3
    assert g.h == pytest.approx(0.125)
    assert g.cell_volume == pytest.approx(g.L**3 / g.n)


@pytest.mark.parametrize("N,M,s", [(4, 2, 8), (3, 0, 8), (3, 2, 5), (3, 2, 2)])
def test_grid_rejects_bad_sizes(N, M, s):
    with pytest.raises(ValueError):
        make_grid(N, M, s)


def test_field_shape_mismatch():
    g = make_grid(2, 2, 8)
    with pytest.raises(GridMismatchError):
        integrate(g, np.zeros((8, 8)))


def test_transform_round_trip(rng):
    g = make_grid(3, 2, 4)
    u = rng.standard_normal(g.shape)
    assert np.allclose(inverse_transform(g, transform(g, u)), u, atol=1e-13)
    assert np.allclose(irtransform(g, rtransform(g, u)), u, atol=1e-13)


def test_plane_wave_calculus():
    g = make_grid(2, 3, 8)
    x, y = g.coords()
    k = 2 * math.pi * 2 / g.L
    u = np.sin(k * x) * np.cos(k * y)
    assert np.allclose(laplacian(g, u), -2 * k**2 * u, atol=1e-10)
    gx, gy = gradient(g, u)
    assert np.allclose(gx, k * np.cos(k * x) * np.cos(k * y), atol=1e-10)
    # |grad u|^2 integrates to k^2 |Omega| / 2
    assert gradient_sq_integral(g, u) == pytest.approx(k**2 * g.L**2 / 2, rel=1e-12)
    assert l2_norm(g, u) ** 2 == pytest.approx(g.L**2 / 4, rel=1e-12)
    assert h1_norm(g, u) ** 2 == pytest.approx(g.L**2 / 4 + k**2 * g.L**2 / 2, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_parseval(seed):
    g = make_grid(2, 2, 8)
    r = np.random.default_rng(seed)
    u, v = r.standard_normal(g.shape), r.standard_normal(g.shape)
    U, W = transform(g, u), transform(g, v)
    assert l2_inner(g, u, v) == pytest.approx(g.L**2 * np.vdot(U, W).real, rel=1e-10, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
def test_lattice_translation_invariance(seed, k):
    g = make_grid(2, 3, 4)
    u = np.random.default_rng(seed).standard_normal(g.shape)
    w = shift_cells(g, u, k)
    assert integrate(g, w**2) == pytest.approx(integrate(g, u**2), rel=1e-12)
    assert h1_norm(g, w) == pytest.approx(h1_norm(g, u), rel=1e-12)
    assert np.array_equal(shift_cells(g, w, [-c for c in k]), u)


def test_cosine_potential_is_periodic():
    g = make_grid(3, 2, 8)
    V = sample_potential(PotentialSpec("cosine", 5.0, -1.0), g)
    cells = cell_view(g, V)
    assert np.allclose(cells - cells[0, 0, 0], 0.0, atol=1e-13)
    assert V[0, 0, 0] == pytest.approx(-1.0 + 15.0)


def test_tabulated_potential_size_check():
    g = make_grid(1, 2, 4)
    V = sample_potential(PotentialSpec("tabulated", table=np.arange(4.0), c0=1.0), g)
    assert np.array_equal(V, np.r_[1.0, 2, 3, 4, 1, 2, 3, 4])
    with pytest.raises(ValueError, match="s\\^N"):
        sample_potential(PotentialSpec("tabulated", table=np.arange(5.0)), g)


def test_snapshot_round_trip(tmp_path, rng):
    g = make_grid(2, 2, 4)
    u = rng.standard_normal(g.shape)
    write_snapshot(tmp_path / "u.chqf", g, u)
    g2, u2 = read_snapshot(tmp_path / "u.chqf")
    assert g2 == g and np.array_equal(u, u2)
    (tmp_path / "bad").write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(ValueError, match="not a CHQF"):
        read_snapshot(tmp_path / "bad")
