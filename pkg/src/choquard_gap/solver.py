"""Newton-Krylov solver for critical points of ``Phi_lambda``.

Each step solves ``DF(u) d = -F(u)`` with MINRES (``DF`` is symmetric but
indefinite), preconditioned by the exact spectral operator ``|S_lambda|^{-1}``,
then backtracks on the dual residual norm.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

from . import energy
from .ansatz import BlochEdgeWave, CutoffSpec, psi_R
from .bloch import GapInfo
from .energy import ChoquardProblem, EnergyReport
from .grid import cell_view, h1_norm, shift_cells

log = logging.getLogger(__name__)

CONVERGED, TRIVIAL, MAX_ITERS, BLOW_UP = 0, 2, 3, 4
STATUS_NAMES = {CONVERGED: "converged", TRIVIAL: "trivial", MAX_ITERS: "max_iters", BLOW_UP: "blow_up"}
TRIVIAL_NORM = 1e-7


@dataclass
class SolverOptions:
    max_newton_iters: int = 40
    residual_tol: float = 1e-8
    krylov_tol: float = 1e-6
    krylov_max_iters: int = 300
    max_halvings: int = 30
    max_amplitude: float = 1e6

    def __post_init__(self):
        if not (self.residual_tol > 0 and self.krylov_tol > 0 and self.max_amplitude > 0):
            raise ValueError("tolerances must be positive")
        if self.max_newton_iters < 1 or self.krylov_max_iters < 1:
            raise ValueError("iteration limits must be ≥ 1")


@dataclass
class SolutionRecord:
    lam: float
    status: int
    phi: float
    j_value: float
    h1_norm: float
    h1_norm_plus: float
    h1_norm_minus: float
    residual_dual_norm: float
    newton_iters: int
    report: EnergyReport
    snapshot: str | None = None
    u: np.ndarray | None = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("u")
        d["lambda"] = d.pop("lam")
        d["converged"] = self.converged
        d["status_name"] = STATUS_NAMES[self.status]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# -- seeds ------------------------------------------------------------------


def ray_maximizer(q: float, j: float, p: float) -> float:
    """``s* = (Q/J)^{1/(2p-2)}``, the maximizer of ``s^2 Q/2 - s^{2p} J/(2p)``."""
    if j <= 0:
        raise ValueError("degenerate ansatz: J(zeta) = 0")
    if q <= 0:
        raise ValueError("degenerate ansatz: Q(zeta) ≤ 0")
    return (q / j) ** (1.0 / (2 * p - 2))


def ansatz_initial(problem: ChoquardProblem, gap: GapInfo, wave: BlochEdgeWave, cutoff: CutoffSpec | None = None):
    """Scaled plus-projection of ``Psi_R`` with ``R = (b - lambda)^{-1/2}``.

    ``R`` is clamped to ``[1, L / (2 r2)]`` with a warning.
    """
    cutoff = cutoff or CutoffSpec()
    lam = problem.lam
    if not gap.a < lam < gap.b:
        raise ValueError("lambda outside the gap")
    grid = problem.grid
    R = 1.0 / math.sqrt(gap.b - lam)
    R_max = grid.L / (2 * cutoff.r2)
    if R > R_max or R < 1:
        warnings.warn(f"cutoff radius R={R:.4g} clamped to [1, {R_max:g}]", stacklevel=2)
        R = min(max(R, 1.0), R_max)
    _, zeta = problem.split(psi_R(wave, cutoff, R, grid))
    s = ray_maximizer(energy.quadratic(problem, zeta), energy.j_value(problem, zeta), problem.params.p)
    return s * zeta


def petviashvili(problem: ChoquardProblem, u0, iters: int = 200, tol: float = 1e-10):
    """Stabilized fixed point ``u <- M^gamma S^{-1} N(u)`` for positive ``S_lambda``."""
    if np.any(problem.shifted_mu <= 0):
        raise ValueError("Petviashvili iteration needs S_lambda > 0")
    p = problem.params.p
    gamma = (2 * p - 1) / (2 * p - 2)
    u = np.array(u0, dtype=float)
    for _ in range(iters):
        g = energy.nonlinearity(problem, u)
        su = problem.s_apply(u)
        num = float(np.sum(su * u))
        den = float(np.sum(g * u))
        if den <= 0:
            break
        new = (num / den) ** gamma * problem.abs_s_inverse(g)
        diff = np.abs(new - u).max() / max(np.abs(new).max(), 1e-300)
        u = new
        if diff < tol:
            break
    return u


# -- Newton -----------------------------------------------------------------


def _record(u, problem, status, iters, res):
    um, up = problem.split(u)
    rep = energy.energy_report(u, problem)
    grid = problem.grid
    return SolutionRecord(
        lam=problem.lam,
        status=status,
        phi=rep.phi,
        j_value=rep.j_value,
        h1_norm=h1_norm(grid, u),
        h1_norm_plus=h1_norm(grid, up),
        h1_norm_minus=h1_norm(grid, um),
        residual_dual_norm=res,
        newton_iters=iters,
        report=rep,
        u=u,
    )


def newton_solve(u0, problem: ChoquardProblem, opts: SolverOptions | None = None) -> SolutionRecord:
    opts = opts or SolverOptions()
    u = np.array(u0, dtype=float)
    if not np.any(u):
        raise ValueError("initial guess must be nonzero")
    grid = problem.grid
    shape = grid.shape
    F = energy.phi_residual(u, problem)
    res = energy.dual_norm(F, problem)
    status = MAX_ITERS
    it = 0
    prec = LinearOperator((grid.n, grid.n), matvec=lambda r: problem.abs_s_inverse(r.reshape(shape)).ravel(), dtype=float)
    while True:
        if h1_norm(grid, u) < TRIVIAL_NORM:
            status = TRIVIAL
            break
        if not np.all(np.isfinite(u)) or np.abs(u).max() > opts.max_amplitude:
            status = BLOW_UP
            break
        if res <= opts.residual_tol:
            status = CONVERGED
            break
        if it >= opts.max_newton_iters:
            break
        it += 1
        cache = energy.jacobian_cache(u, problem)
        A = LinearOperator(
            (grid.n, grid.n),
            matvec=lambda v: energy.jacobian_apply(u, v.reshape(shape), problem, cache).ravel(),
            dtype=float,
        )
        d, _ = minres(A, -F.ravel(), M=prec, rtol=opts.krylov_tol, maxiter=opts.krylov_max_iters)
        d = d.reshape(shape)
        t = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = u + t * d
            Ft = energy.phi_residual(trial, problem)
            rt = energy.dual_norm(Ft, problem)
            if np.isfinite(rt) and rt < res:
                break
            t *= 0.5
        u, F, res = trial, Ft, rt
        log.debug("newton %d: residual %.3e step %.3g", it, res, t)
    if status == CONVERGED:
        u = normalize_translation(grid, u)
    return _record(u, problem, status, it, res)


# -- orbit representative ---------------------------------------------------


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    diff = np.flatnonzero(a.ravel() != b.ravel())
    return bool(diff.size) and a.ravel()[diff[0]] < b.ravel()[diff[0]]


def normalize_translation(grid, u, rel_tie: float = 1e-9):
    """Lattice shift placing the cell of largest ``∫ u^2`` at the origin cell.

    Near-ties are broken by the lexicographically smallest rounded field, which
    keeps the map idempotent and constant on lattice orbits.
    """
    dens = (cell_view(grid, u) ** 2).sum(axis=tuple(range(grid.N, 2 * grid.N)))
    top = dens.max()
    cands = np.argwhere(dens >= top * (1 - rel_tie))
    best, best_key = None, None
    for c in cands:
        v = shift_cells(grid, u, c)
        key = np.round(v, 12)
        if best is None or _lex_less(key, best_key):
            best, best_key = v, key
    return best
