"""Band-edge Bloch wave, its cutoff family ``Psi_R`` and the edge scaling laws."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .bloch import BlochDecomposition, GapInfo, _split, from_blocks
from .grid import TorusGrid, cell_view, check_field, h1_norm, l2_norm, laplacian
from .riesz import NonlocalParams, j_energy

_PROFILES = ("quintic", "bump")


@dataclass(frozen=True)
class CutoffSpec:
    """Radial cutoff ``eta``: 1 on ``|x| ≤ r1``, 0 on ``|x| ≥ r2``."""

    r1: float = 1.0
    r2: float = 2.0
    profile: str = "quintic"

    def __post_init__(self):
        if self.profile not in _PROFILES:
            raise ValueError(f"profile must be one of {_PROFILES}")
        if not 0 < self.r1 < self.r2:
            raise ValueError("need 0 < r1 < r2")

    def __call__(self, r):
        t = np.clip((np.asarray(r, dtype=float) - self.r1) / (self.r2 - self.r1), 0.0, 1.0)
        if self.profile == "quintic":
            return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        # C-infinity transition f(1-t) / (f(1-t) + f(t)) with f(x) = exp(-1/x)
        with np.errstate(divide="ignore", over="ignore"):
            f0 = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
            f1 = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        return f0 / (f0 + f1)


def _centered_radius(grid: TorusGrid) -> np.ndarray:
    c = grid.L / 2
    r2 = sum((x - c) ** 2 for x in grid.coords())
    return np.sqrt(r2)


def cutoff_field(cutoff: CutoffSpec, R: float, grid: TorusGrid) -> np.ndarray:
    """``R^{-N/2} eta(|x - center| / R)`` centered in the torus."""
    return R ** (-grid.N / 2) * cutoff(_centered_radius(grid) / R)


# -- Bloch edge wave --------------------------------------------------------


@dataclass
class BlochEdgeWave:
    """Edge eigenfunction ``e^{i kappa x} phi(x)`` stored by cell coefficients.

    ``kappa_frac`` is ``kappa / (2 pi)`` per axis; the wave can be sampled on any
    grid whose quasimomentum lattice contains it.
    """

    cell_coeffs: np.ndarray
    kappa_frac: tuple
    eigenvalue: float
    s: int
    realify: bool
    scale: complex = 1.0

    @property
    def N(self) -> int:
        return len(self.kappa_frac)

    @property
    def symmetric(self) -> bool:
        return all(abs(2 * k - round(2 * k)) < 1e-12 for k in self.kappa_frac)

    def sample(self, grid: TorusGrid) -> np.ndarray:
        if grid.N != self.N or grid.s != self.s:
            raise ValueError("grid dimension or cell resolution differs from the wave")
        m = []
        for k in self.kappa_frac:
            q = k * grid.M
            if abs(q - round(q)) > 1e-9:
                raise ValueError(f"incommensurate edge quasimomentum {self.kappa_frac} for M={grid.M}")
            m.append(int(round(q)) % grid.M)
        B = np.zeros((grid.M**grid.N, grid.s**grid.N), dtype=complex)
        B[np.ravel_multi_index(tuple(m), (grid.M,) * grid.N)] = self.cell_coeffs
        f = np.fft.ifftn(from_blocks(grid, B)) * grid.n * self.scale
        return f.real.copy() if self.realify else f


def bloch_edge_wave(decomp: BlochDecomposition, gap: GapInfo, upper: bool = True) -> BlochEdgeWave:
    """Normalized (``max |Psi| = 1``) eigenfunction at the edge ``b`` (or ``a``)."""
    grid = decomp.grid
    i, j = (gap.kappa_index_b, gap.column_b) if upper else (gap.kappa_index_a, gap.column_a)
    if i < 0:
        raise ValueError("gap carries no edge location")
    mu = float(decomp.mu[i, j])
    m = decomp.kappa_indices[i]
    kappa = tuple(float(x) / grid.M for x in m)
    c = np.asarray(decomp.cell_vector(i, j), dtype=complex)
    wave = BlochEdgeWave(c, kappa, mu, grid.s, realify=False)
    f = wave.sample(grid)
    symmetric = wave.symmetric
    if symmetric:
        # real operator: Re and Im of an eigenfunction are eigenfunctions
        k = int(np.argmax(np.abs(f)))
        phase = np.conj(f.flat[k]) / abs(f.flat[k])
        wave.scale = phase
        wave.realify = True
        f = wave.sample(grid)
    wave.scale = wave.scale / np.abs(f).max()
    return wave


def edge_residual(wave: BlochEdgeWave, grid: TorusGrid, potential: np.ndarray) -> float:
    psi = wave.sample(grid)
    r = -laplacian(grid, psi.real) + potential * psi.real - wave.eigenvalue * psi.real
    if np.iscomplexobj(psi):
        ri = -laplacian(grid, psi.imag) + potential * psi.imag - wave.eigenvalue * psi.imag
        return math.hypot(l2_norm(grid, r), l2_norm(grid, ri))
    return l2_norm(grid, r)


def psi_R(wave: BlochEdgeWave, cutoff: CutoffSpec, R: float, grid: TorusGrid) -> np.ndarray:
    """``R^{-N/2} eta((x - c)/R) Psi(x)`` with ``c`` the torus center."""
    if R < 1:
        raise ValueError("R must be ≥ 1")
    if cutoff.r2 * R > grid.L / 2 + 1e-12:
        raise ValueError(f"R={R} too large for the grid (needs {cutoff.r2}R ≤ L/2 = {grid.L / 2})")
    return cutoff_field(cutoff, R, grid) * wave.sample(grid)


def mean_value(grid: TorusGrid, f: np.ndarray, tol: float = 1e-10) -> float:
    """Mean over one unit cell of an exactly 1-periodic field."""
    cells = cell_view(grid, check_field(grid, f))
    ref = cells[(0,) * grid.N]
    scale = max(1.0, float(np.abs(ref).max()))
    if np.abs(cells - ref).max() > tol * scale:
        raise ValueError("field is not 1-periodic")
    return float(np.mean(ref))


# -- scaling diagnostics ----------------------------------------------------


def scaling_exponent(params: NonlocalParams) -> float:
    return params.N * params.p - params.N - params.alpha


def riemann_lebesgue_check(wave, cutoff, params: NonlocalParams, R_list, grid: TorusGrid):
    """Rows ``R, R^e J(Psi_R), target, unit_target, rel_gap``.

    ``target = M(|Psi|^p)^2 R^e J(eta_R)`` uses the cutoff at the same scale on the
    same torus (so both sides see identical periodization); ``unit_target`` is
    ``M(|Psi|^p)^2 J(eta)`` at ``R = 1``.
    """
    e = scaling_exponent(params)
    psi = wave.sample(grid)
    mp = mean_value(grid, np.abs(psi) ** params.p)
    unit = mp**2 * j_energy(grid, cutoff_field(cutoff, 1.0, grid), params)
    rows = []
    for R in R_list:
        f = psi_R(wave, cutoff, R, grid)
        val = R**e * j_energy(grid, f if wave.realify else np.abs(f), params)
        target = mp**2 * R**e * j_energy(grid, cutoff_field(cutoff, R, grid), params)
        rows.append({"R": float(R), "scaled_j": val, "target": target, "unit_target": unit, "rel_gap": abs(val - target) / target})
    return rows


def _loglog(x, y):
    fit = stats.linregress(np.log(x), np.log(y))
    return float(fit.slope), float(fit.stderr)


def edge_scaling_study(decomp, gap, wave, cutoff, params: NonlocalParams, potential, lambda_list):
    """Rows ``(b - lambda, |P0 Psi_R|_{H1}, Q(zeta), J(zeta)(b-lambda)^{-e/2})`` with ``R = (b-lambda)^{-1/2}``.

    Fields live on ``decomp.grid``.  Returns ``(rows, slopes)``; ``slopes`` maps each column to ``(slope, stderr)``.
    """
    from .energy import ChoquardProblem, quadratic

    grid = decomp.grid
    if not wave.realify:
        raise ValueError("edge scaling study needs a real edge wave")
    e = scaling_exponent(params)
    problem = ChoquardProblem(grid, potential, params, 0.0, decomp)
    rows = []
    for lam in lambda_list:
        d = gap.b - lam
        if not 0 < d < gap.b - gap.a:
            raise ValueError("lambda outside the gap")
        R = 1.0 / math.sqrt(d)
        pr = problem.at(lam)
        f = psi_R(wave, cutoff, R, grid)
        pm = _split(f, decomp, lam, "minus")
        zeta = f - pm
        rows.append({
            "b_minus_lambda": d,
            "R": R,
            "p0_h1": h1_norm(grid, pm),
            "q_zeta": quadratic(pr, zeta),
            "j_scaled": j_energy(grid, zeta, params) * d ** (-e / 2),
        })
    x = [r["b_minus_lambda"] for r in rows]
    slopes = {}
    for col in ("p0_h1", "q_zeta", "j_scaled"):
        y = [r[col] for r in rows]
        slopes[col] = _loglog(x, y) if len(rows) >= 2 and min(y) > 0 else (math.nan, math.nan)
    return rows, slopes


def edge_bound_target(wave, cutoff, params: NonlocalParams, grid: TorusGrid) -> float:
    """``2^{1-2p} M(|Psi|^p)^2 J(eta)``, the liminf lower bound for the scaled ``J(zeta)``."""
    mp = mean_value(grid, np.abs(wave.sample(grid)) ** params.p)
    return 2.0 ** (1 - 2 * params.p) * mp**2 * j_energy(grid, cutoff_field(cutoff, 1.0, grid), params)
