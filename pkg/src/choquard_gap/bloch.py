"""Floquet-Bloch decomposition of ``S0 = -Δ + V`` on the supercell.

The supercell Fourier index ``K`` (FFT order, ``side = M s`` values per axis)
splits as ``K = M k + m`` with cell index ``k`` and quasimomentum index
``m ∈ [0, M)``.  For each ``m`` the cell operator

    H_m[k, k'] = |2 pi (k + m / M)|^2 delta_kk' + Vhat_cell[k - k' mod s]

is exactly the restriction of the discretized supercell operator, so the
M^N commensurate quasimomenta reproduce it without interpolation.

Two backends share one interface:

* :class:`DenseBloch` diagonalizes each ``s^N x s^N`` block directly;
* :class:`SeparableBloch` handles additively separable potentials
  ``V = c + sum_i V_i(x_i)``, whose blocks are Kronecker sums of 1D Hill
  matrices.  It is exact, and cheap enough for ``L = 16`` supercells.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .grid import TorusGrid, check_field, gradient_sq_integral, integrate, l2_inner

_EIG_TOL = 1e-10


class SpectrumError(ValueError):
    """Raised when a level meets the (discretized) spectrum."""


# -- block layout -----------------------------------------------------------


def to_blocks(grid: TorusGrid, Fhat: np.ndarray) -> np.ndarray:
    """Supercell coefficients -> array ``(M^N, s^N)`` indexed ``[m, k]``."""
    N, M, s = grid.N, grid.M, grid.s
    B = Fhat.reshape(sum(((s, M) for _ in range(N)), ()))
    B = B.transpose(tuple(range(1, 2 * N, 2)) + tuple(range(0, 2 * N, 2)))
    return B.reshape(M**N, s**N)


def from_blocks(grid: TorusGrid, B: np.ndarray) -> np.ndarray:
    N, M, s = grid.N, grid.M, grid.s
    B = B.reshape((M,) * N + (s,) * N)
    order = []
    for d in range(N):
        order += [N + d, d]
    return B.transpose(order).reshape(grid.shape)


def _cell_wavenumbers(grid: TorusGrid) -> np.ndarray:
    """Integer cell wave vectors ``(s^N, N)`` in FFT order, C-ordered."""
    k1 = np.fft.fftfreq(grid.s, d=1.0 / grid.s)
    return np.array(list(itertools.product(k1, repeat=grid.N)))


def _kappa_indices(grid: TorusGrid) -> np.ndarray:
    return np.array(list(itertools.product(range(grid.M), repeat=grid.N)), dtype=int)


def cell_potential_hat(grid: TorusGrid, potential: np.ndarray) -> np.ndarray:
    """DFT of one unit cell after checking exact 1-periodicity."""
    V = check_field(grid, potential)
    cell = V[(slice(0, grid.s),) * grid.N]
    if not np.allclose(np.tile(cell, (grid.M,) * grid.N), V, rtol=0, atol=1e-12 * max(1.0, np.abs(V).max())):
        raise ValueError("potential is not 1-periodic on the grid")
    return np.fft.fftn(cell) / grid.s**grid.N


def cell_matrix(grid: TorusGrid, Vhat_cell: np.ndarray, m) -> np.ndarray:
    """Dense cell operator ``H_m`` for quasimomentum index tuple ``m``."""
    k = _cell_wavenumbers(grid)
    frac = np.asarray(m, dtype=float) / grid.M
    kin = np.sum((2 * np.pi * (k + frac)) ** 2, axis=1)
    diff = (k[:, None, :] - k[None, :, :]).astype(int) % grid.s
    flat = np.ravel_multi_index(tuple(diff[..., d] for d in range(grid.N)), (grid.s,) * grid.N)
    H = Vhat_cell.ravel()[flat].astype(complex)
    H[np.diag_indices_from(H)] += kin
    return H


def is_separable(grid: TorusGrid, Vhat_cell: np.ndarray, tol: float = 1e-12) -> bool:
    """True when only on-axis cell Fourier modes are non-zero."""
    if grid.N == 1:
        return True
    idx = np.indices(Vhat_cell.shape).reshape(grid.N, -1)
    off_axis = (idx != 0).sum(axis=0) >= 2
    scale = max(1.0, np.abs(Vhat_cell).max())
    return bool(np.abs(Vhat_cell.ravel()[off_axis]).max(initial=0.0) <= tol * scale)


# -- decompositions ---------------------------------------------------------


class BlochDecomposition:
    """Common interface; eigenvalues ``mu`` have shape ``(M^N, s^N)``.

    For :class:`DenseBloch` each row is ascending; :meth:`bands` always returns
    the per-quasimomentum sorted view.
    """

    grid: TorusGrid
    mu: np.ndarray

    def to_eigen(self, u: np.ndarray) -> np.ndarray:
        """Expansion coefficients of a real field in the Bloch eigenbasis."""
        grid = self.grid
        B = to_blocks(grid, np.fft.fftn(check_field(grid, u)) / grid.n)
        return self._analyse(B)

    def from_eigen(self, c: np.ndarray, real: bool = True) -> np.ndarray:
        grid = self.grid
        f = np.fft.ifftn(from_blocks(grid, self._synthesise(c))) * grid.n
        return f.real.copy() if real else f

    def spectral_apply(self, u: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """``f(S0) u`` for ``weights = f(mu)`` of shape ``mu.shape``."""
        return self.from_eigen(self.to_eigen(u) * weights)

    def spectral_sum(self, u: np.ndarray, weights: np.ndarray) -> float:
        """``⟨f(S0) u, u⟩_2`` evaluated as ``L^N sum f(mu) |c|^2``."""
        c = self.to_eigen(u)
        return float(self.grid.L**self.grid.N * np.sum(weights * (c.real**2 + c.imag**2)))

    def bands(self, nbands: int | None = None) -> np.ndarray:
        b = np.sort(self.mu, axis=1)
        return b if nbands is None else b[:, :nbands]

    @property
    def kappa_indices(self) -> np.ndarray:
        return _kappa_indices(self.grid)

    def band_ranges(self):
        b = self.bands()
        return b.min(axis=0), b.max(axis=0)

    def eigenfunction(self, kappa_index: int, j: int) -> np.ndarray:
        """Complex supercell eigenfunction for row ``kappa_index``, column ``j`` of ``mu``."""
        c = np.zeros(self.mu.shape, dtype=complex)
        c[kappa_index, j] = 1.0
        return self.from_eigen(c, real=False)

    def cell_vector(self, kappa_index: int, j: int) -> np.ndarray:
        raise NotImplementedError

    def _analyse(self, B):
        raise NotImplementedError

    def _synthesise(self, c):
        raise NotImplementedError


class DenseBloch(BlochDecomposition):
    def __init__(self, grid: TorusGrid, Vhat_cell: np.ndarray, workers: int = 1):
        self.grid = grid
        self.Vhat_cell = Vhat_cell
        kappas = _kappa_indices(grid)

        def solve(m):
            H = cell_matrix(grid, Vhat_cell, m)
            try:
                return np.linalg.eigh(H)
            except np.linalg.LinAlgError as exc:
                raise RuntimeError(f"eigensolver failed at kappa index {tuple(m)}") from exc

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(solve, kappas))
        else:
            results = [solve(m) for m in kappas]
        self.mu = np.array([r[0] for r in results])
        self.W = np.array([r[1] for r in results])

    def _analyse(self, B):
        return np.einsum("mkj,mk->mj", self.W.conj(), B)

    def _synthesise(self, c):
        return np.einsum("mkj,mj->mk", self.W, c)

    def cell_vector(self, kappa_index, j):
        return self.W[kappa_index, :, j]


class SeparableBloch(BlochDecomposition):
    """Kronecker-sum backend for ``V = c + sum_i V_i(x_i)``."""

    def __init__(self, grid: TorusGrid, Vhat_cell: np.ndarray):
        self.grid = grid
        self.Vhat_cell = Vhat_cell
        N, M, s = grid.N, grid.M, grid.s
        k1 = np.fft.fftfreq(s, d=1.0 / s)
        diff = (k1[:, None] - k1[None, :]).astype(int) % s
        self.mu1, self.W1 = [], []
        for d in range(N):
            line = np.zeros(s, dtype=complex)
            for q in range(s):
                idx = [0] * N
                idx[d] = q
                line[q] = Vhat_cell[tuple(idx)]
            if d != 0:
                line[0] = 0.0  # constant assigned to the first axis only
            mus, Ws = [], []
            for m in range(M):
                H = line[diff].copy()
                H[np.diag_indices_from(H)] += (2 * np.pi * (k1 + m / M)) ** 2
                w, v = np.linalg.eigh(H)
                mus.append(w)
                Ws.append(v)
            self.mu1.append(np.array(mus))
            self.W1.append(np.array(Ws))
        total = 0.0
        for d in range(N):
            shape = [1] * (2 * N)
            shape[d], shape[N + d] = M, s
            total = total + self.mu1[d].reshape(shape)
        self.mu = np.ascontiguousarray(np.broadcast_to(total, (M,) * N + (s,) * N)).reshape(M**N, s**N)

    def _apply_axes(self, B, forward):
        N, M, s = self.grid.N, self.grid.M, self.grid.s
        T = B.reshape((M,) * N + (s,) * N)
        for d in range(N):
            T = np.moveaxis(T, (d, N + d), (0, 1))
            sh = T.shape
            W = self.W1[d]
            op = W.conj().transpose(0, 2, 1) if forward else W
            T = np.matmul(op, T.reshape(M, s, -1)).reshape(sh)
            T = np.moveaxis(T, (0, 1), (d, N + d))
        return np.ascontiguousarray(T).reshape(M**N, s**N)

    def _analyse(self, B):
        return self._apply_axes(B, forward=True)

    def _synthesise(self, c):
        return self._apply_axes(c, forward=False)

    def cell_vector(self, kappa_index, j):
        N, M, s = self.grid.N, self.grid.M, self.grid.s
        ms = np.unravel_index(kappa_index, (M,) * N)
        js = np.unravel_index(j, (s,) * N)
        v = np.ones(1, dtype=complex)
        for d in range(N):
            v = np.kron(v, self.W1[d][ms[d]][:, js[d]])
        return v

    def block_vectors(self, kappa_index: int) -> np.ndarray:
        """Dense eigenvector matrix of one block (columns follow ``mu`` order)."""
        N, M = self.grid.N, self.grid.M
        ms = np.unravel_index(kappa_index, (M,) * N)
        W = np.ones((1, 1), dtype=complex)
        for d in range(N):
            W = np.kron(W, self.W1[d][ms[d]])
        return W


def band_structure(
    potential: np.ndarray,
    grid: TorusGrid,
    nbands: int | None = None,
    method: str = "auto",
    workers: int = 1,
) -> BlochDecomposition:
    """Bloch decomposition of ``-Δ + V`` over the ``M^N`` commensurate quasimomenta.

    ``method`` is ``"dense"``, ``"separable"`` or ``"auto"`` (separable when the
    potential allows it).  ``nbands`` limits only the reported band table.
    """
    Vhat = cell_potential_hat(grid, potential)
    if method == "auto":
        method = "separable" if is_separable(grid, Vhat) else "dense"
    if method == "separable":
        if not is_separable(grid, Vhat):
            raise ValueError("potential is not additively separable")
        decomp = SeparableBloch(grid, Vhat)
    elif method == "dense":
        decomp = DenseBloch(grid, Vhat, workers=workers)
    else:
        raise ValueError(f"unknown method {method!r}")
    decomp.nbands = nbands
    return decomp


def bands_table(decomp: BlochDecomposition, nbands: int | None = None):
    """Rows ``(kappa_index_1..N, band_index, eigenvalue)``."""
    nb = nbands if nbands is not None else getattr(decomp, "nbands", None)
    b = decomp.bands(nb)
    rows = []
    for i, m in enumerate(decomp.kappa_indices):
        for j, mu in enumerate(b[i]):
            rows.append((*map(int, m), j, float(mu)))
    return rows


# -- gap --------------------------------------------------------------------


@dataclass
class GapInfo:
    """Gap ``(a, b)`` around a level; quasimomenta as fractions ``m / M``."""

    a: float
    b: float
    edge_band_a: int
    edge_band_b: int
    kappa_a: list
    kappa_b: list
    kappa_index_a: int = -1
    kappa_index_b: int = -1
    column_a: int = -1
    column_b: int = -1

    @property
    def width(self) -> float:
        return self.b - self.a

    def to_json(self) -> str:
        d = asdict(self)
        keep = ("a", "b", "edge_band_a", "edge_band_b", "kappa_a", "kappa_b")
        return json.dumps({k: d[k] for k in keep}, sort_keys=True)


def check_level(decomp: BlochDecomposition, level: float, tol: float = _EIG_TOL) -> None:
    lo, hi = decomp.band_ranges()
    if np.any((lo - tol <= level) & (level <= hi + tol)):
        raise SpectrumError(f"level inside spectrum: {level} lies in a band")
    if not (decomp.mu < level).any() or not (decomp.mu > level).any():
        raise SpectrumError(f"level inside spectrum: no gap contains {level}")


def find_gap(decomp: BlochDecomposition, level: float = 0.0) -> GapInfo:
    check_level(decomp, level)
    mu = decomp.mu
    below = np.where(mu < level, mu, -np.inf)
    above = np.where(mu > level, mu, np.inf)
    ia = np.unravel_index(np.argmax(below), mu.shape)
    ib = np.unravel_index(np.argmin(above), mu.shape)
    M = decomp.grid.M
    kappas = decomp.kappa_indices

    def rank(i):
        row = mu[i[0]]
        return int(np.sum(row < row[i[1]]))

    return GapInfo(
        a=float(mu[ia]),
        b=float(mu[ib]),
        edge_band_a=rank(ia),
        edge_band_b=rank(ib),
        kappa_a=[float(x) / M for x in kappas[ia[0]]],
        kappa_b=[float(x) / M for x in kappas[ib[0]]],
        kappa_index_a=int(ia[0]),
        kappa_index_b=int(ib[0]),
        column_a=int(ia[1]),
        column_b=int(ib[1]),
    )


def first_gap_center(decomp: BlochDecomposition) -> float:
    """Midpoint of the lowest spectral gap (between consecutive band ranges)."""
    lo, hi = decomp.band_ranges()
    top = np.maximum.accumulate(hi)
    for j in range(len(lo) - 1):
        if lo[j + 1] > top[j] + _EIG_TOL:
            return 0.5 * (top[j] + lo[j + 1])
    raise SpectrumError("no spectral gap in the sampled bands")


# -- projectors and quadratic forms -----------------------------------------


def project(u: np.ndarray, decomp: BlochDecomposition, level: float, side: str) -> np.ndarray:
    """Spectral projector of ``S0`` onto ``mu < level`` (minus) or ``mu > level`` (plus)."""
    check_level(decomp, level)
    return _split(u, decomp, level, side)


def _split(u, decomp, level, side, tol=_EIG_TOL):
    if side == "minus":
        mask = decomp.mu < level - tol
    elif side == "plus":
        mask = decomp.mu > level + tol
    else:
        raise ValueError("side must be 'minus' or 'plus'")
    return decomp.spectral_apply(u, mask)


def quadratic_form(grid: TorusGrid, u: np.ndarray, potential: np.ndarray, lam: float) -> float:
    """``Q_lambda(u) = ∫ |∇u|^2 + (V - lambda) u^2``."""
    return gradient_sq_integral(grid, u) + integrate(grid, (potential - lam) * u * u)


def e_lambda_norm(u: np.ndarray, decomp: BlochDecomposition, potential: np.ndarray, lam: float) -> float:
    """``sqrt(Q(u+) - Q(u-))`` with the splitting of ``S_lambda``."""
    grid = decomp.grid
    up = _split(u, decomp, lam, "plus")
    um = _split(u, decomp, lam, "minus")
    val = quadratic_form(grid, up, potential, lam) - quadratic_form(grid, um, potential, lam)
    return math.sqrt(max(val, 0.0))


def e_lambda_norm_spectral(u: np.ndarray, decomp: BlochDecomposition, lam: float) -> float:
    """Same norm from the eigen-expansion, ``L^N sum |mu - lambda| |c|^2``."""
    return math.sqrt(max(decomp.spectral_sum(u, np.abs(decomp.mu - lam)), 0.0))


def qj_projection(u: np.ndarray, decomp: BlochDecomposition, a: float, j: float) -> np.ndarray:
    """Cutoff projection ``P_{a,-1/j} + (Id - P_{a,0})``; ``j = inf`` keeps everything."""
    if j < 1:
        raise ValueError("j must be ≥ 1")
    shifted = decomp.mu - a
    shifted = np.where(np.abs(shifted) <= _EIG_TOL * max(1.0, abs(a)), 0.0, shifted)
    cut = 0.0 if math.isinf(j) else -1.0 / j
    return decomp.spectral_apply(u, (shifted <= cut) | (shifted > 0))


# -- definiteness constants --------------------------------------------------


@dataclass
class SplittingConstants:
    """Tight ``alpha0``, ``beta0`` with the piecewise ``alpha_lambda``, ``beta_lambda``."""

    alpha0: float
    beta0: float
    a: float
    b: float

    def alpha_lambda(self, lam: float) -> float:
        return self.alpha0 * (1 - lam / self.a) if lam <= 0 else self.alpha0

    def beta_lambda(self, lam: float) -> float:
        return self.beta0 * (1 - lam / self.b) if lam > 0 else self.beta0


def _block_vectors(decomp, i):
    if isinstance(decomp, DenseBloch):
        return decomp.W[i]
    return decomp.block_vectors(i)


def _block_h1_weights(grid, m):
    k = _cell_wavenumbers(grid)
    frac = np.asarray(m, dtype=float) / grid.M
    return 1.0 + np.sum((2 * np.pi * (k + frac)) ** 2, axis=1)


def generalized_min(decomp: BlochDecomposition, mask: np.ndarray, sign: float, lam: float = 0.0) -> float:
    """``min sign * Q_lambda(u) / |u|_{H1}^2`` over ``u`` in the span selected by ``mask``.

    Per quasimomentum block this is the smallest eigenvalue of
    ``sign * diag(mu - lambda)`` relative to the Gram matrix of the H1 norm.
    """
    grid = decomp.grid
    best = math.inf
    for i, m in enumerate(decomp.kappa_indices):
        sel = np.flatnonzero(mask[i])
        if sel.size == 0:
            continue
        W = _block_vectors(decomp, i)[:, sel]
        G = (W.conj().T * _block_h1_weights(grid, m)) @ W
        A = np.diag(sign * (decomp.mu[i, sel] - lam)).astype(complex)
        val = scipy.linalg.eigh(A, G, eigvals_only=True, subset_by_index=[0, 0])[0]
        best = min(best, float(val))
    if math.isinf(best):
        raise ValueError("degenerate splitting: empty subspace")
    return best


def splitting_constants(decomp: BlochDecomposition, gap: GapInfo, level: float = 0.0) -> SplittingConstants:
    minus = decomp.mu < level
    plus = decomp.mu > level
    if not minus.any() or not plus.any():
        raise ValueError("degenerate splitting: empty E- or E+")
    alpha0 = generalized_min(decomp, minus, -1.0)
    beta0 = generalized_min(decomp, plus, 1.0)
    return SplittingConstants(alpha0=alpha0, beta0=beta0, a=gap.a, b=gap.b)


def norm_equivalence_constants(decomp: BlochDecomposition, lam: float, mask: np.ndarray):
    """``(c, C)`` with ``c |u|_{H1}^2 ≤ |u|_{E_lambda}^2 ≤ C |u|_{H1}^2`` on the masked span."""
    lo = generalized_min(decomp, mask, 1.0, lam)
    grid = decomp.grid
    hi = -math.inf
    for i, m in enumerate(decomp.kappa_indices):
        sel = np.flatnonzero(mask[i])
        if sel.size == 0:
            continue
        W = _block_vectors(decomp, i)[:, sel]
        G = (W.conj().T * _block_h1_weights(grid, m)) @ W
        A = np.diag(np.abs(decomp.mu[i, sel] - lam)).astype(complex)
        n = sel.size
        val = scipy.linalg.eigh(A, G, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0]
        hi = max(hi, float(val))
    return lo, hi


def h1_inner(grid: TorusGrid, u, v) -> float:
    from .grid import rtransform

    U, Vh = rtransform(grid, u), rtransform(grid, v)
    w = (1.0 + grid.xi2_half) * grid.half_weights
    return float(grid.L**grid.N * np.sum(w * (U * Vh.conj()).real))


__all__ = [
    "BlochDecomposition",
    "DenseBloch",
    "SeparableBloch",
    "GapInfo",
    "SplittingConstants",
    "SpectrumError",
    "band_structure",
    "bands_table",
    "find_gap",
    "first_gap_center",
    "project",
    "quadratic_form",
    "e_lambda_norm",
    "e_lambda_norm_spectral",
    "qj_projection",
    "splitting_constants",
    "norm_equivalence_constants",
    "l2_inner",
    "h1_inner",
]
