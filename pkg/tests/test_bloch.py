import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import mathieu_a, mathieu_b

from choquard_gap.bloch import (
    SpectrumError,
    band_structure,
    bands_table,
    e_lambda_norm,
    e_lambda_norm_spectral,
    find_gap,
    first_gap_center,
    from_blocks,
    project,
    qj_projection,
    quadratic_form,
    to_blocks,
)
from choquard_gap.grid import PotentialSpec, l2_inner, laplacian, make_grid, sample_potential
from choquard_gap.verify import hill_bands_1d, separable_gap_oracle

G2 = make_grid(2, 3, 8)


def _nonseparable(grid):
    x, y = grid.coords()
    return 6 * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y) + 2 * np.sin(2 * np.pi * (x + y)) + 0 * x * y


def test_block_layout_round_trip(rng):
    F = rng.standard_normal(G2.shape) + 1j * rng.standard_normal(G2.shape)
    B = to_blocks(G2, F)
    assert B.shape == (G2.M**2, G2.s**2)
    assert np.array_equal(from_blocks(G2, B), F)


@pytest.mark.parametrize("method", ["dense", "separable"])
def test_decomposition_reproduces_operator(method, rng):
    V = sample_potential(PotentialSpec("cosine", 7.0, 0.5), G2)
    d = band_structure(V, G2, method=method)
    u = rng.standard_normal(G2.shape)
    Su = d.spectral_apply(u, d.mu)
    assert np.allclose(Su, -laplacian(G2, u) + V * u, atol=1e-10 * np.abs(Su).max())
    assert np.allclose(d.from_eigen(d.to_eigen(u)), u, atol=1e-12)


def test_dense_and_separable_agree():
    V = sample_potential(PotentialSpec("cosine", 7.0), G2)
    a = band_structure(V, G2, method="dense").bands()
    b = band_structure(V, G2, method="separable").bands()
    assert np.allclose(a, b, atol=1e-11)


def test_nonseparable_uses_dense(rng):
    V = _nonseparable(G2)
    d = band_structure(V, G2)
    assert type(d).__name__ == "DenseBloch"
    with pytest.raises(ValueError, match="not additively separable"):
        band_structure(V, G2, method="separable")
    u = rng.standard_normal(G2.shape)
    assert np.allclose(d.spectral_apply(u, d.mu), -laplacian(G2, u) + V * u, atol=1e-9)


def test_free_bands_are_paraboloids():
    g = make_grid(1, 4, 4)
    d = band_structure(np.zeros(g.shape), g)
    for i, (m,) in enumerate(d.kappa_indices):
        k = np.fft.fftfreq(4, d=0.25)
        assert np.allclose(d.bands()[i], np.sort((2 * np.pi * (k + m / 4)) ** 2), atol=1e-12)


def test_hill_oracle_matches_mathieu():
    # -u'' + V0 cos(2 pi x) u is Mathieu's equation with q = V0 / (2 pi^2), energies scaled by pi^2
    q = 15.0 / (2 * math.pi**2)
    b = hill_bands_1d(15.0, 32, 2)
    assert b[0, 0] == pytest.approx(math.pi**2 * mathieu_a(0, q), rel=1e-7)
    assert b[1, 0] == pytest.approx(math.pi**2 * mathieu_b(1, q), rel=1e-7)
    assert b[1, 1] == pytest.approx(math.pi**2 * mathieu_a(1, q), rel=1e-7)


def test_standard_gap_against_mathieu(standard):
    # continuum edges: top of 3 x band 1 at theta = 1/2, and 2 x bottom band 1 + bottom band 2
    q = 15.0 / (2 * math.pi**2)
    a = 3 * math.pi**2 * mathieu_b(1, q) + standard.c0
    b = math.pi**2 * (2 * mathieu_a(0, q) + mathieu_a(1, q)) + standard.c0
    assert standard.gap.a == pytest.approx(a, abs=1e-5)
    assert standard.gap.b == pytest.approx(b, abs=1e-5)
    oa, ob = separable_gap_oracle(15.0, 3, 8, 4, standard.c0)
    assert standard.gap.a == pytest.approx(oa, abs=1e-10) and standard.gap.b == pytest.approx(ob, abs=1e-10)


def test_standard_gap_is_centered(standard):
    gap = standard.gap
    assert gap.a < 0 < gap.b
    assert gap.a + gap.b == pytest.approx(0.0, abs=1e-10)
    assert gap.kappa_a == [0.5, 0.5, 0.5]
    assert sorted(gap.kappa_b) == [0.0, 0.0, 0.5]
    out = json.loads(gap.to_json())
    assert set(out) == {"a", "b", "edge_band_a", "edge_band_b", "kappa_a", "kappa_b"}


def test_level_inside_spectrum():
    g = make_grid(1, 4, 8)
    V = sample_potential(PotentialSpec("cosine", 15.0), g)
    d = band_structure(V, g)
    c = first_gap_center(d)
    assert find_gap(d, c).a < c
    with pytest.raises(SpectrumError, match="level inside spectrum"):
        find_gap(d, d.mu.min() + 1e-3 * (c - d.mu.min()))
    with pytest.raises(SpectrumError):
        find_gap(d, d.mu.min() - 1.0)


def test_bands_table_rows():
    g = make_grid(1, 2, 4)
    d = band_structure(np.zeros(g.shape), g)
    rows = bands_table(d, 2)
    assert len(rows) == 4 and rows[0][:2] == (0, 0) and rows[0][2] == pytest.approx(0.0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_projector_algebra(seed):
    g = make_grid(1, 6, 8)
    V = sample_potential(PotentialSpec("cosine", 15.0), g)
    d = band_structure(V, g)
    lvl = first_gap_center(d)
    u = np.random.default_rng(seed).standard_normal(g.shape)
    up, um = project(u, d, lvl, "plus"), project(u, d, lvl, "minus")
    scale = np.abs(u).max()
    assert np.allclose(up + um, u, atol=1e-11 * scale)
    assert np.allclose(project(up, d, lvl, "plus"), up, atol=1e-11 * scale)
    assert abs(l2_inner(g, up, um)) < 1e-10 * l2_inner(g, u, u)
    # quadratic form splits and the E-norm has two routes
    assert quadratic_form(g, u, V, lvl) == pytest.approx(quadratic_form(g, up, V, lvl) + quadratic_form(g, um, V, lvl), rel=1e-9)
    assert e_lambda_norm(u, d, V, lvl) == pytest.approx(e_lambda_norm_spectral(u, d, lvl), rel=1e-9)


def test_qj_projection_limits(rng):
    g = make_grid(1, 6, 8)
    V = sample_potential(PotentialSpec("cosine", 15.0), g)
    d = band_structure(V, g)
    lvl = first_gap_center(d)
    a = find_gap(d, lvl).a
    u = rng.standard_normal(g.shape)
    assert np.allclose(qj_projection(u, d, a, math.inf), u, atol=1e-12)
    # large j removes exactly the eigenspace at a on a discrete spectrum
    edge = d.spectral_apply(u, np.isclose(d.mu, a, rtol=0, atol=1e-9))
    assert np.abs(edge).max() > 0
    assert np.allclose(qj_projection(u, d, a, 1e6) + edge, u, atol=1e-11)
    with pytest.raises(ValueError):
        qj_projection(u, d, a, 0.5)
