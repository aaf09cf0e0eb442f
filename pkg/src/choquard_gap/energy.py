"""The indefinite functional ``Phi(u) = Q(u)/2 - J(u)/(2p)`` and its derivatives."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from .bloch import BlochDecomposition, SplittingConstants, _split, band_structure
from .grid import (
    TorusGrid,
    check_field,
    gradient_sq_integral,
    h1_norm,
    integrate,
    l2_inner,
    laplacian,
)
from .kernels import nonlinear_terms
from .riesz import NonlocalParams, j_energy, riesz_apply

_FLOOR = 1e-300


@dataclass
class ChoquardProblem:
    """``-Δu + (V - lambda) u = (I_alpha * |u|^p) |u|^(p-2) u`` on a torus grid."""

    grid: TorusGrid
    potential: np.ndarray
    params: NonlocalParams
    lam: float
    decomp: BlochDecomposition | None = field(default=None, repr=False)

    def __post_init__(self):
        check_field(self.grid, self.potential)
        if self.params.N != self.grid.N:
            raise ValueError("dimension of params and grid differ")
        if self.decomp is None:
            self.decomp = band_structure(self.potential, self.grid)

    def at(self, lam: float) -> "ChoquardProblem":
        return ChoquardProblem(self.grid, self.potential, self.params, float(lam), self.decomp)

    @cached_property
    def rp(self):
        return self.params.riesz(self.grid)

    @cached_property
    def shifted_mu(self) -> np.ndarray:
        return self.decomp.mu - self.lam

    @property
    def is_free(self) -> bool:
        return not np.any(self.potential)

    # -- linear part --

    def s_apply(self, u):
        """``S_lambda u = -Δu + (V - lambda) u``."""
        return -laplacian(self.grid, u) + (self.potential - self.lam) * u

    def abs_s_inverse(self, u):
        """``|S_lambda|^{-1} u`` through the Bloch eigenbasis."""
        return self.decomp.spectral_apply(u, 1.0 / np.maximum(np.abs(self.shifted_mu), _FLOOR))

    def split(self, u):
        """``(u-, u+)`` for the splitting of ``S_lambda`` at 0."""
        return _split(u, self.decomp, self.lam, "minus"), _split(u, self.decomp, self.lam, "plus")


def quadratic(problem: ChoquardProblem, u) -> float:
    g = problem.grid
    return gradient_sq_integral(g, u) + integrate(g, (problem.potential - problem.lam) * u * u)


def j_value(problem: ChoquardProblem, u) -> float:
    return j_energy(problem.grid, u, problem.params)


def phi(u, problem: ChoquardProblem) -> float:
    """``Phi_lambda(u) = Q_lambda(u)/2 - J(u)/(2p)``."""
    return 0.5 * quadratic(problem, u) - j_value(problem, u) / (2 * problem.params.p)


def nonlinearity(problem: ChoquardProblem, u):
    up, sg, _ = nonlinear_terms(u, problem.params.p)
    return riesz_apply(problem.grid, up, problem.rp) * sg


def phi_residual(u, problem: ChoquardProblem):
    """Strong-form residual ``S_lambda u - (I_alpha * |u|^p)|u|^(p-2) u``."""
    u = check_field(problem.grid, u)
    return problem.s_apply(u) - nonlinearity(problem, u)


def jacobian_apply(u, v, problem: ChoquardProblem, cache=None):
    """``DF(u)[v] = S v - p (I*(|u|^{p-2}u v)) |u|^{p-2}u - (p-1)(I*|u|^p)|u|^{p-2} v``."""
    g, rp, p = problem.grid, problem.rp, problem.params.p
    if cache is None:
        cache = jacobian_cache(u, problem)
    sg, conv, d1 = cache
    return problem.s_apply(v) - p * riesz_apply(g, sg * v, rp) * sg - conv * d1 * v


def jacobian_cache(u, problem: ChoquardProblem):
    up, sg, d1 = nonlinear_terms(u, problem.params.p)
    return sg, riesz_apply(problem.grid, up, problem.rp), d1


def dual_norm(F, problem: ChoquardProblem) -> float:
    """``| |S_lambda|^{-1/2} F |_2`` computed in the Bloch eigenbasis."""
    w = 1.0 / np.maximum(np.abs(problem.shifted_mu), _FLOOR)
    return math.sqrt(max(problem.decomp.spectral_sum(F, w), 0.0))


def critical_identity_defect(u, problem: ChoquardProblem) -> float:
    """Relative gap in ``Phi(u) = (p-1)/(2p) J(u)``; 0 for ``u = 0``."""
    p = problem.params.p
    f = phi(u, problem)
    rhs = (p - 1) / (2 * p) * j_value(problem, u)
    denom = abs(f) + abs(rhs)
    return 0.0 if denom == 0 else abs(f - rhs) / denom


def pohozaev_terms(u, problem: ChoquardProblem):
    if not problem.is_free:
        raise ValueError("Pohozaev identity requires V ≡ 0")
    g, N, alpha, p = problem.grid, problem.grid.N, problem.params.alpha, problem.params.p
    return (
        (N - 2) / 2 * gradient_sq_integral(g, u),
        -N / 2 * problem.lam * l2_inner(g, u, u),
        -(N + alpha) / (2 * p) * j_value(problem, u),
    )


def pohozaev_defect(u, problem: ChoquardProblem) -> float:
    """Normalized residual of the Pohozaev identity for the autonomous equation."""
    t = pohozaev_terms(u, problem)
    denom = sum(abs(x) for x in t)
    return 0.0 if denom == 0 else abs(sum(t)) / denom


def splitting_chain(u, problem: ChoquardProblem, splitting: SplittingConstants):
    """``(beta |u+|_{H1}^2, Q(u+) - Q(u-), (2^{2p} J(u+) - J(u)) / (2p))``."""
    p = problem.params.p
    um, up = problem.split(u)
    lower = splitting.beta_lambda(problem.lam) * h1_norm(problem.grid, up) ** 2
    middle = quadratic(problem, up) - quadratic(problem, um)
    upper = (2 ** (2 * p) * j_value(problem, up) - j_value(problem, u)) / (2 * p)
    return lower, middle, upper


@dataclass
class EnergyReport:
    phi: float
    j_value: float
    q_value: float
    residual_l2: float
    critical_identity_defect: float
    pohozaev_defect: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def energy_report(u, problem: ChoquardProblem) -> EnergyReport:
    q = quadratic(problem, u)
    j = j_value(problem, u)
    res = phi_residual(u, problem)
    return EnergyReport(
        phi=0.5 * q - j / (2 * problem.params.p),
        j_value=j,
        q_value=q,
        residual_l2=math.sqrt(l2_inner(problem.grid, res, res)),
        critical_identity_defect=critical_identity_defect(u, problem),
        pohozaev_defect=pohozaev_defect(u, problem) if problem.is_free else None,
    )
