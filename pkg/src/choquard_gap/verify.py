"""Randomized property suite: Riesz identities and inequalities, derivative
checks, projector algebra, splitting bounds and the ``lambda = a`` norms.

Every check returns :class:`Check` rows; nothing here raises on failure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import energy
from .bloch import (
    BlochDecomposition,
    GapInfo,
    SplittingConstants,
    _split,
    band_structure,
    e_lambda_norm_spectral,
    find_gap,
    norm_equivalence_constants,
    qj_projection,
    quadratic_form,
    splitting_constants,
)
from .energy import ChoquardProblem
from .grid import TorusGrid, h1_norm, integrate, l2_inner, l2_norm
from .riesz import (
    NonlocalParams,
    bilinear_cs_sides,
    convexity_sides,
    coulomb_norm,
    gradient_bound_sides,
    half_riesz_apply,
    hls_check,
    j_energy,
    j_energy_direct,
    j_gradient,
    riesz_apply,
)


@dataclass
class Check:
    name: str
    passed: bool
    worst: float
    tol: float
    cases: int
    detail: str = ""

    def row(self):
        return (self.name, "pass" if self.passed else "FAIL", float(self.worst), float(self.tol), int(self.cases), self.detail)


# -- random fields ----------------------------------------------------------


def random_smooth(grid: TorusGrid, rng: np.random.Generator, kmax: float = 3.0) -> np.ndarray:
    """Real field with Gaussian-damped random Fourier coefficients (``|k| ≲ kmax`` per unit length)."""
    xi2 = grid.xi2_half
    damp = np.exp(-xi2 / (2 * (2 * np.pi * kmax / 3) ** 2))
    F = (rng.standard_normal(grid.half_shape) + 1j * rng.standard_normal(grid.half_shape)) * damp
    f = np.fft.irfftn(F, s=grid.shape, axes=grid.axes)
    return f / np.abs(f).max()


def random_bump(grid: TorusGrid, rng: np.random.Generator) -> np.ndarray:
    """Nonnegative Gaussian bump with random center, width and height."""
    L = grid.L
    ctr = rng.uniform(0, L, grid.N)
    w = rng.uniform(0.15, 0.3) * L
    r2 = sum(((x - c + L / 2) % L - L / 2) ** 2 for x, c in zip(grid.coords(), ctr))
    return rng.uniform(0.5, 2.0) * np.exp(-r2 / (2 * w * w))


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


# -- Riesz suite ------------------------------------------------------------


def hls_sharp_constant(N: int, alpha: float) -> float:
    """Sharp diagonal HLS constant for the kernel ``A_alpha |x|^{alpha - N}``, ``t = r = 2N/(N+alpha)``."""
    lam = N - alpha
    A = special.gamma((N - alpha) / 2) / (2**alpha * math.pi ** (N / 2) * special.gamma(alpha / 2))
    c = (
        math.pi ** (lam / 2)
        * special.gamma(N / 2 - lam / 2)
        / special.gamma(N - lam / 2)
        * (special.gamma(N / 2) / special.gamma(N)) ** (-1 + lam / N)
    )
    return A * c


def riesz_suite(grid: TorusGrid, params: NonlocalParams, rng: np.random.Generator, n_ident: int = 20, n_ineq: int = 200):
    rp = params.riesz(grid)
    out = []

    worst = 0.0
    for _ in range(n_ident):
        f = random_smooth(grid, rng)
        f = f - f.mean()
        ref = riesz_apply(grid, f, rp)
        hh = half_riesz_apply(grid, half_riesz_apply(grid, f, rp), rp)
        worst = max(worst, l2_norm(grid, hh - ref) / l2_norm(grid, ref))
    out.append(Check("semigroup", worst < 1e-10, worst, 1e-10, n_ident, "mean-zero fields"))

    worst = 0.0
    for _ in range(n_ident):
        f, g = random_smooth(grid, rng), random_smooth(grid, rng)
        lhs = integrate(grid, riesz_apply(grid, f, rp) * g)
        rhs = integrate(grid, half_riesz_apply(grid, f, rp) * half_riesz_apply(grid, g, rp))
        scale = math.sqrt(integrate(grid, riesz_apply(grid, f, rp) * f) * integrate(grid, riesz_apply(grid, g, rp) * g))
        worst = max(worst, abs(lhs - rhs) / scale)
    out.append(Check("half_order_pairing", worst < 1e-10, worst, 1e-10, n_ident))

    worst = 0.0
    for _ in range(n_ident):
        u = random_smooth(grid, rng)
        worst = max(worst, _rel(j_energy(grid, u, params), j_energy_direct(grid, u, params)))
    out.append(Check("j_two_routes", worst < 1e-10, worst, 1e-10, n_ident))

    def suite(name, gen, sides, ok, tol):
        slack_min, bad = math.inf, 0
        for _ in range(n_ineq):
            lhs, rhs = sides(*gen())
            s = ok(lhs, rhs)
            slack_min = min(slack_min, s)
            bad += s < -tol
        out.append(Check(name, bad == 0, slack_min, -tol, n_ineq, f"{bad} violations"))

    def dens_pair():
        return np.abs(random_smooth(grid, rng)) ** params.p, random_bump(grid, rng)

    suite(
        "bilinear_cauchy_schwarz",
        dens_pair,
        lambda f, g: bilinear_cs_sides(grid, f, g, rp.alpha, rp.zero_mode),
        lambda l, r: (r - l) / max(abs(r), 1e-300),
        1e-12,
    )
    suite(
        "gradient_bound",
        lambda: (random_smooth(grid, rng), random_smooth(grid, rng)),
        lambda u, v: gradient_bound_sides(grid, u, v, params),
        lambda l, r: (r - abs(l)) / max(abs(r), 1e-300),
        1e-12,
    )
    t = 2 * grid.N / (grid.N + params.alpha)
    C = hls_sharp_constant(grid.N, params.alpha)
    suite(
        "hls_sharp_constant",
        dens_pair,
        lambda f, h: hls_check(grid, f, h, t, t, rp.alpha, rp.zero_mode),
        lambda l, r: (C * r - l) / max(C * r, 1e-300),
        1e-12,
    )
    suite(
        "convexity",
        lambda: (random_smooth(grid, rng), rng.uniform(0.1, 2) * random_smooth(grid, rng)),
        lambda u, w: convexity_sides(grid, u, w, params),
        lambda l, r: (l - r) / max(abs(l), abs(r), 1e-300),
        1e-12,
    )
    suite(
        "coulomb_triangle",
        lambda: (random_smooth(grid, rng), random_smooth(grid, rng)),
        lambda u, w: (coulomb_norm(grid, u + w, params), coulomb_norm(grid, u, params) + coulomb_norm(grid, w, params)),
        lambda l, r: (r - l) / max(r, 1e-300),
        1e-10,
    )
    return out


# -- derivative checks ------------------------------------------------------


def gradient_suite(problem: ChoquardProblem, rng: np.random.Generator, n: int = 50, eps: float = 1e-5):
    g, params = problem.grid, problem.params
    wj = wphi = wjac = 0.0
    for _ in range(n):
        u = rng.uniform(0.5, 2.0) * random_smooth(g, rng)
        v = random_smooth(g, rng)
        an = integrate(g, j_gradient(g, u, params) * v)
        fd = (j_energy(g, u + eps * v, params) - j_energy(g, u - eps * v, params)) / (2 * eps)
        wj = max(wj, _rel(an, fd))
        F = energy.phi_residual(u, problem)
        an = l2_inner(g, F, v)
        fd = (energy.phi(u + eps * v, problem) - energy.phi(u - eps * v, problem)) / (2 * eps)
        wphi = max(wphi, _rel(an, fd))
        an = energy.jacobian_apply(u, v, problem)
        fd = (energy.phi_residual(u + eps * v, problem) - energy.phi_residual(u - eps * v, problem)) / (2 * eps)
        wjac = max(wjac, l2_norm(g, an - fd) / l2_norm(g, an))
    return [
        Check("j_gradient_fd", wj < 1e-6, wj, 1e-6, n),
        Check("phi_gradient_fd", wphi < 1e-6, wphi, 1e-6, n),
        Check("jacobian_fd", wjac < 1e-5, wjac, 1e-5, n),
    ]


# -- spectral checks --------------------------------------------------------


def projector_suite(decomp: BlochDecomposition, level: float, rng: np.random.Generator, n: int = 10):
    g = decomp.grid
    worst = {"idempotent": 0.0, "orthogonal": 0.0, "resolution": 0.0}
    for _ in range(n):
        u = random_smooth(g, rng)
        nu = l2_norm(g, u)
        um, up = _split(u, decomp, level, "minus"), _split(u, decomp, level, "plus")
        worst["resolution"] = max(worst["resolution"], l2_norm(g, um + up - u) / nu)
        worst["orthogonal"] = max(worst["orthogonal"], abs(l2_inner(g, um, up)) / nu**2)
        e = max(
            l2_norm(g, _split(um, decomp, level, "minus") - um),
            l2_norm(g, _split(up, decomp, level, "plus") - up),
            l2_norm(g, _split(um, decomp, level, "plus")),
        )
        worst["idempotent"] = max(worst["idempotent"], e / nu)
    return [Check(f"projector_{k}", v < 1e-10, v, 1e-10, n) for k, v in worst.items()]


def hill_bands_1d(V0: float, s: int, M: int) -> np.ndarray:
    """1D Hill problem ``-u'' + V0 cos(2 pi x) u`` in the ``s``-mode plane-wave basis; rows are ``theta = m/M``."""
    k = np.fft.fftfreq(s, d=1.0 / s)
    out = []
    for m in range(M):
        H = np.diag((2 * np.pi * (k + m / M)) ** 2).astype(float)
        for i in range(s):
            for j in range(s):
                if (k[i] - k[j]) % s in (1, s - 1):
                    H[i, j] += V0 / 2
        out.append(np.linalg.eigvalsh(H))
    return np.array(out)


def separable_gap_oracle(V0: float, N: int, s: int, M: int, c0: float = 0.0):
    """Gap edges of ``c0 + V0 sum cos(2 pi x_i)`` from 1D bands: ``(a, b)`` around ``level``."""
    b1 = hill_bands_1d(V0, s, M)
    lo = b1[:, 0]
    a = N * lo.max() + c0
    # lowest state above the first 3D band: one axis leaves band 1
    b = (N - 1) * lo.min() + b1[:, 1].min() + c0
    return a, b


def free_band_check(grid: TorusGrid):
    d = band_structure(np.zeros(grid.shape), grid, method="dense" if grid.s**grid.N <= 512 else "auto")
    k1 = np.fft.fftfreq(grid.s, d=1.0 / grid.s)
    k = np.array(np.meshgrid(*([k1] * grid.N), indexing="ij")).reshape(grid.N, -1).T
    worst = 0.0
    for i, m in enumerate(d.kappa_indices):
        exact = np.sort(np.sum((2 * np.pi * (k + m / grid.M)) ** 2, axis=1))
        worst = max(worst, np.abs(d.bands()[i] - exact).max() / max(1.0, exact.max()))
    return Check("free_bands_exact", worst < 1e-10, worst, 1e-10, len(d.kappa_indices))


def hill_gap_check(gap: GapInfo, V0: float, c0: float, grid: TorusGrid, tol: float = 1e-8):
    """Computed gap edges of the separable cosine potential against the 1D oracle."""
    a, b = separable_gap_oracle(V0, grid.N, grid.s, grid.M, c0)
    worst = max(abs(gap.a - a), abs(gap.b - b)) / max(1.0, abs(a), abs(b))
    return Check("hill_gap_edges", worst < tol, worst, tol, 2, f"oracle a={a:.12g} b={b:.12g}")


# -- splitting bounds -------------------------------------------------------


def _random_in(decomp, level, side, rng, grid):
    if rng.random() < 0.5:
        return _split(random_smooth(grid, rng, kmax=rng.uniform(1, 4)), decomp, level, side)
    mask = decomp.mu < level if side == "minus" else decomp.mu > level
    c = np.zeros(decomp.mu.shape, dtype=complex)
    idx = np.flatnonzero(mask.ravel())
    pick = rng.choice(idx, size=min(8, idx.size), replace=False)
    c.ravel()[pick] = rng.standard_normal(pick.size) + 1j * rng.standard_normal(pick.size)
    c.ravel()[pick] *= np.exp(-decomp.mu.ravel()[pick] / 400.0)
    f = decomp.from_eigen(c, real=False)
    return f.real if np.abs(f.real).max() >= np.abs(f.imag).max() else f.imag


def splitting_suite(decomp, gap: GapInfo, splitting: SplittingConstants, potential, rng, n: int = 100):
    """Definiteness bounds on random elements of ``E-`` and ``E+`` at three interior ``lambda``."""
    g = decomp.grid
    w = gap.b - gap.a
    out = []
    for tag, lam in (("near_a", gap.a + 0.1 * w), ("mid", 0.5 * (gap.a + gap.b)), ("near_b", gap.b - 0.1 * w)):
        smin = math.inf
        for _ in range(n):
            um = _random_in(decomp, lam, "minus", rng, g)
            up = _random_in(decomp, lam, "plus", rng, g)
            hm, hp = h1_norm(g, um) ** 2, h1_norm(g, up) ** 2
            s1 = (-quadratic_form(g, um, potential, lam) - splitting.alpha_lambda(lam) * hm) / hm
            s2 = (quadratic_form(g, up, potential, lam) - splitting.beta_lambda(lam) * hp) / hp
            smin = min(smin, s1, s2)
        out.append(Check(f"definiteness_{tag}", smin >= -1e-8, smin, -1e-8, 2 * n, f"lambda={lam:.6g}"))
    return out


# -- lambda = a substitutes -------------------------------------------------


def e_q_norm(decomp, u, a: float, params: NonlocalParams) -> float:
    """``|u|_{E_a} + |u|_{Q}`` (the norm of the completion used at ``lambda = a``)."""
    return e_lambda_norm_spectral(u, decomp, a) + coulomb_norm(decomp.grid, u, params)


def lambda_a_suite(decomp, gap: GapInfo, params: NonlocalParams, rng, n: int = 100):
    g = decomp.grid
    a = gap.a
    out = []
    worst_idem = worst_nest = 0.0
    js = [1.0, 2.0, 4.0, 16.0, math.inf]
    for _ in range(10):
        u = random_smooth(g, rng)
        nu = l2_norm(g, u)
        qs = [qj_projection(u, decomp, a, j) for j in js]
        for j, q in zip(js, qs):
            worst_idem = max(worst_idem, l2_norm(g, qj_projection(q, decomp, a, j) - q) / nu)
        for i in range(len(js) - 1):
            # range grows with j: Q_k Q_j = Q_j for j < k
            worst_nest = max(worst_nest, l2_norm(g, qj_projection(qs[i], decomp, a, js[i + 1]) - qs[i]) / nu)
        worst_idem = max(worst_idem, l2_norm(g, qs[-1] - u) / nu)
    out.append(Check("qj_idempotent", worst_idem < 1e-10, worst_idem, 1e-10, 10 * len(js)))
    out.append(Check("qj_nested", worst_nest < 1e-10, worst_nest, 1e-10, 10 * (len(js) - 1)))

    plus = decomp.mu > a + 1e-10 * max(1, abs(a))
    lo, hi = norm_equivalence_constants(decomp, a, plus)
    smin = math.inf
    ratios = []
    tri = math.inf
    for _ in range(n):
        u = _random_in(decomp, gap.b - 1e-12, "plus", rng, g) if rng.random() < 0.5 else _split(random_smooth(g, rng), decomp, a, "plus")
        h = h1_norm(g, u) ** 2
        e = e_lambda_norm_spectral(u, decomp, a) ** 2
        smin = min(smin, (e - lo * h) / h, (hi * h - e) / h)
        ratios.append(e_q_norm(decomp, u, a, params) / math.sqrt(h))
        v = _split(random_smooth(g, rng), decomp, a, "plus")
        l, r = e_q_norm(decomp, u + v, a, params), e_q_norm(decomp, u, a, params) + e_q_norm(decomp, v, a, params)
        tri = min(tri, (r - l) / r)
    out.append(Check("ea_h1_equivalence_plus", lo > 0 and smin >= -1e-10, smin, -1e-10, n, f"c={lo:.6g} C={hi:.6g}"))
    out.append(Check(
        "eq_h1_equivalence_plus",
        bool(min(ratios) >= math.sqrt(lo) * (1 - 1e-10) and np.isfinite(max(ratios))),
        min(ratios),
        math.sqrt(lo),
        n,
        f"E_Q/H1 in [{min(ratios):.6g}, {max(ratios):.6g}]",
    ))
    out.append(Check("eq_triangle", tri >= -1e-10, tri, -1e-10, n))
    return out


def run_all(grid: TorusGrid, potential, params: NonlocalParams, seed: int = 0, cosine=None):
    """Full suite on one configuration; ``potential`` must have a gap at 0.

    ``cosine=(V0, c0)`` adds the 1D Hill oracle comparison for the separable cosine potential.
    """
    rng = np.random.default_rng(seed)
    decomp = band_structure(potential, grid)
    gap = find_gap(decomp, 0.0)
    split = splitting_constants(decomp, gap)
    problem = ChoquardProblem(grid, potential, params, 0.5 * (gap.a + gap.b), decomp)
    checks = []
    checks += riesz_suite(grid, params, rng)
    checks += gradient_suite(problem, rng)
    checks += projector_suite(decomp, 0.0, rng)
    checks.append(free_band_check(grid))
    if cosine is not None:
        checks.append(hill_gap_check(gap, cosine[0], cosine[1], grid))
    checks += splitting_suite(decomp, gap, split, potential, rng)
    checks += lambda_a_suite(decomp, gap, params, rng)
    return checks
