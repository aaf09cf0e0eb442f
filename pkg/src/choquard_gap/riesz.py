"""Riesz potential on the torus and the nonlocal functional J.

``I_alpha * f`` is realised as the Fourier multiplier ``|xi|^-alpha`` with the
normalisation ``A_alpha = Gamma((N-alpha)/2) / (2^alpha pi^(N/2) Gamma(alpha/2))``
already absorbed, so no extra constant appears.  The ``k = 0`` entry is a free
parameter of the periodisation (``zero_mode``); see :func:`default_zero_mode`
and :func:`ewald_zero_mode`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .grid import (
    TorusGrid,
    apply_multiplier,
    check_field,
    integrate,
    lp_norm,
    rtransform,
    shift_cells,
)
from .kernels import nonlinear_terms, weighted_sumsq


def riesz_constant(N: int, alpha: float) -> float:
    """``A_alpha`` in ``I_alpha(x) = A_alpha |x|^(alpha - N)``."""
    return math.gamma((N - alpha) / 2) / (2**alpha * math.pi ** (N / 2) * math.gamma(alpha / 2))


def _check_alpha(N, alpha):
    if not 0.0 < alpha < N:
        raise ValueError(f"alpha must lie in (0, N) = (0, {N}), got {alpha}")


@dataclass(frozen=True)
class RieszParams:
    alpha: float
    zero_mode: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.zero_mode < 0:
            raise ValueError("zero_mode must be ≥ 0")


@dataclass(frozen=True)
class NonlocalParams:
    """Exponent ``p`` and Riesz order ``alpha`` for the nonlinearity.

    ``zero_mode`` is ``None``/``"truncated"`` (default), ``"ewald"`` or a number.
    """

    N: int
    alpha: float
    p: float
    zero_mode: float | str | None = None

    def __post_init__(self):
        _check_alpha(self.N, self.alpha)
        if not self.p_low < self.p < self.p_high:
            raise ValueError(
                f"p out of admissible range ({self.p_low:g}, {self.p_high:g}) for N={self.N}, alpha={self.alpha}"
            )

    @property
    def p_low(self) -> float:
        return (self.N + self.alpha) / self.N

    @property
    def p_high(self) -> float:
        return (self.N + self.alpha) / (self.N - 2) if self.N > 2 else math.inf

    def riesz(self, grid: TorusGrid) -> RieszParams:
        return RieszParams(self.alpha, resolve_zero_mode(grid, self.alpha, self.zero_mode))


# -- zero mode policies -----------------------------------------------------


def default_zero_mode(alpha: float, grid: TorusGrid) -> float:
    """Mean of the kernel truncated to the ball of radius ``L/2``.

    ``∫_{|x| ≤ L/2} A_alpha |x|^(alpha-N) dx = A_alpha sigma_{N-1} (L/2)^alpha / alpha``.
    """
    N = grid.N
    _check_alpha(N, alpha)
    sphere = 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)
    return riesz_constant(N, alpha) * sphere * (grid.L / 2) ** alpha / alpha


def ewald_zero_mode(alpha: float, grid: TorusGrid, nmax: int = 6) -> float:
    """Zero mode that removes the constant offset between torus and free kernels.

    Chooses ``m0`` so the periodised kernel minus ``A_alpha |x|^(alpha-N)``
    vanishes at the origin, using an Ewald split of the heat-kernel
    representation ``|xi|^-alpha = Gamma(a)^-1 ∫ t^(a-1) exp(-t |xi|^2) dt``
    with ``a = alpha / 2``.  The lattice sums run over the continuum lattice,
    independent of the grid resolution.
    """
    N, L = grid.N, grid.L
    _check_alpha(N, alpha)
    a = alpha / 2
    b = N / 2 - a
    tau = L**2 / (4 * math.pi)
    ga = math.gamma(a)
    recip = 0.0
    real = 0.0
    for n in itertools.product(range(-nmax, nmax + 1), repeat=N):
        n2 = sum(c * c for c in n)
        if n2 == 0:
            continue
        xi2 = (2 * math.pi / L) ** 2 * n2
        recip += xi2 ** (-a) * special.gammaincc(a, tau * xi2) * ga
        r2 = L**2 * n2
        real += (r2 / 4) ** (-b) * special.gammaincc(b, r2 / (4 * tau)) * math.gamma(b)
    regular = (
        recip / ga / L**N
        + real / ga / (4 * math.pi) ** (N / 2)
        - tau ** (-b) / (b * ga * (4 * math.pi) ** (N / 2))
        - tau**a / (a * ga * L**N)
    )
    return -regular * L**N


def resolve_zero_mode(grid: TorusGrid, alpha: float, zero_mode=None) -> float:
    if zero_mode is None or zero_mode == "truncated":
        return default_zero_mode(alpha, grid)
    if zero_mode == "ewald":
        return ewald_zero_mode(alpha, grid)
    if isinstance(zero_mode, str):
        raise ValueError(f"unknown zero_mode policy {zero_mode!r}")
    value = float(zero_mode)
    if value < 0:
        raise ValueError("zero_mode must be ≥ 0")
    return value


# -- operator ---------------------------------------------------------------


@lru_cache(maxsize=16)
def riesz_multiplier(grid: TorusGrid, alpha: float, zero_mode: float) -> np.ndarray:
    """``|xi|^-alpha`` on the ``rfftn`` half grid with ``m(0) = zero_mode``."""
    xi2 = grid.xi2_half
    m = np.empty_like(xi2)
    nz = xi2 > 0
    m[nz] = xi2[nz] ** (-alpha / 2)
    m[~nz] = zero_mode
    m.setflags(write=False)
    return m


def riesz_apply(grid: TorusGrid, f: np.ndarray, rp: RieszParams) -> np.ndarray:
    _check_alpha(grid.N, rp.alpha)
    return apply_multiplier(grid, f, riesz_multiplier(grid, rp.alpha, rp.zero_mode))


def half_riesz_apply(grid: TorusGrid, f: np.ndarray, rp: RieszParams) -> np.ndarray:
    """Square root of :func:`riesz_apply`: order ``alpha/2``, zero mode ``sqrt(m0)``."""
    half = RieszParams(rp.alpha / 2, math.sqrt(rp.zero_mode))
    return apply_multiplier(grid, f, riesz_multiplier(grid, half.alpha, half.zero_mode))


def riesz_pairing(grid: TorusGrid, f: np.ndarray, g: np.ndarray, rp: RieszParams) -> float:
    """``∫ (I_alpha * f) g``."""
    return integrate(grid, riesz_apply(grid, f, rp) * g)


# -- the functional J -------------------------------------------------------


def j_energy(grid: TorusGrid, u: np.ndarray, params: NonlocalParams) -> float:
    """``J(u) = ∫ (I_{alpha/2} * |u|^p)^2``, non-negative by construction."""
    rp = params.riesz(grid)
    up, _, _ = nonlinear_terms(check_field(grid, u), params.p)
    m = riesz_multiplier(grid, rp.alpha, rp.zero_mode)
    F = rtransform(grid, up)
    return grid.L**grid.N * weighted_sumsq(m * grid.half_weights, F)


def j_energy_direct(grid: TorusGrid, u: np.ndarray, params: NonlocalParams) -> float:
    """``J(u) = ∫ (I_alpha * |u|^p) |u|^p`` by real-space quadrature."""
    rp = params.riesz(grid)
    up, _, _ = nonlinear_terms(check_field(grid, u), params.p)
    return riesz_pairing(grid, up, up, rp)


def j_energy_semigroup(grid: TorusGrid, u: np.ndarray, params: NonlocalParams) -> float:
    """``J(u)`` as ``∫ (I_{alpha/2} * |u|^p)^2`` with the half operator in real space."""
    rp = params.riesz(grid)
    up, _, _ = nonlinear_terms(check_field(grid, u), params.p)
    w = half_riesz_apply(grid, up, rp)
    return integrate(grid, w * w)


def coulomb_norm(grid: TorusGrid, u: np.ndarray, params: NonlocalParams) -> float:
    return max(j_energy(grid, u, params), 0.0) ** (1.0 / (2 * params.p))


def j_gradient(grid: TorusGrid, u: np.ndarray, params: NonlocalParams) -> np.ndarray:
    """L^2 representative of ``J'(u)``: ``2p (I_alpha * |u|^p) |u|^(p-2) u``."""
    rp = params.riesz(grid)
    up, phi, _ = nonlinear_terms(check_field(grid, u), params.p)
    return 2 * params.p * riesz_apply(grid, up, rp) * phi


# -- property checks --------------------------------------------------------


def hls_check(grid: TorusGrid, f, h, t: float, r: float, alpha: float, zero_mode=None):
    """Return ``(∫(I_alpha*h) f, |f|_t |h|_r)`` for the HLS exponent pair ``(t, r)``."""
    if not (t > 1 and r > 1) or abs(1 / t + 1 / r - 1 - alpha / grid.N) > 1e-12:
        raise ValueError("HLS exponents need t, r > 1 and 1/t + 1/r = 1 + alpha/N")
    rp = RieszParams(alpha, resolve_zero_mode(grid, alpha, zero_mode))
    lhs = riesz_pairing(grid, h, f, rp)
    return lhs, lp_norm(grid, f, t) * lp_norm(grid, h, r)


def bilinear_cs_check(grid: TorusGrid, f, g, alpha: float, zero_mode=None, slack: float = 1e-12) -> bool:
    """``∫(I f) g ≤ [∫(I f) f]^(1/2) [∫(I g) g]^(1/2)`` within relative ``slack``."""
    lhs, rhs = bilinear_cs_sides(grid, f, g, alpha, zero_mode)
    return lhs <= rhs + slack * max(abs(rhs), 1e-300)


def bilinear_cs_sides(grid: TorusGrid, f, g, alpha: float, zero_mode=None):
    rp = RieszParams(alpha, resolve_zero_mode(grid, alpha, zero_mode))
    lhs = riesz_pairing(grid, f, g, rp)
    ff = riesz_pairing(grid, f, f, rp)
    gg = riesz_pairing(grid, g, g, rp)
    return lhs, math.sqrt(max(ff, 0.0) * max(gg, 0.0))


def convexity_sides(grid: TorusGrid, u, w, params: NonlocalParams):
    """``(J(u + w), 2^(1-2p) J(u) - J(w))``."""
    lhs = j_energy(grid, u + w, params)
    rhs = 2.0 ** (1 - 2 * params.p) * j_energy(grid, u, params) - j_energy(grid, w, params)
    return lhs, rhs


def convexity_check(grid: TorusGrid, u, w, params: NonlocalParams, slack: float = 1e-12) -> bool:
    lhs, rhs = convexity_sides(grid, u, w, params)
    return lhs >= rhs - slack * max(abs(lhs), abs(rhs), 1e-300)


def gradient_bound_sides(grid: TorusGrid, u, v, params: NonlocalParams):
    """``(⟨J'(u), v⟩ / 2p, J(u)^(1 - 1/2p) J(v)^(1/2p))``."""
    p = params.p
    lhs = integrate(grid, j_gradient(grid, u, params) * v) / (2 * p)
    rhs = j_energy(grid, u, params) ** (1 - 1 / (2 * p)) * j_energy(grid, v, params) ** (1 / (2 * p))
    return lhs, rhs


def brezis_lieb_check(grid: TorusGrid, u, w, shifts, params: NonlocalParams):
    """Defects of ``J(u_n) - J(u_n - u) -> J(u)`` for ``u_n = u + tau_{k_n} w``.

    ``shifts`` is a sequence of integer lattice vectors (or scalars, applied
    along ``x1``).  Each row holds the shift length, the Brezis-Lieb defect
    ``|J(u_n) - J(tau w) - J(u)|``, the exact nonlocal cross term
    ``2 ∫ (I_alpha * |u|^p) |tau w|^p`` and the residual between the two.
    """
    rp = params.riesz(grid)
    Ju = j_energy(grid, u, params)
    up, _, _ = nonlinear_terms(u, params.p)
    Iu = riesz_apply(grid, up, rp)
    rows = []
    for k in shifts:
        vec = np.zeros(grid.N, dtype=int)
        if np.ndim(k) == 0:
            vec[0] = int(k)
        else:
            vec[:] = np.asarray(k, dtype=int)
        length = float(np.linalg.norm(vec))
        if length > grid.L / 2:
            raise ValueError("shift exceeds half-period")
        tw = shift_cells(grid, w, vec)
        defect = abs(j_energy(grid, u + tw, params) - j_energy(grid, tw, params) - Ju)
        twp, _, _ = nonlinear_terms(tw, params.p)
        cross = 2.0 * integrate(grid, Iu * twp)
        rows.append({"shift": length, "defect": defect, "cross_term": cross, "residual": abs(defect - cross)})
    return rows
