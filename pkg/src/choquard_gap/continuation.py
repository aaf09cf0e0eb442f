"""Continuation in ``lambda`` across the gap and exponent fitting."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .ansatz import BlochEdgeWave, CutoffSpec
from .bloch import GapInfo, SplittingConstants
from .energy import ChoquardProblem, critical_identity_defect, splitting_chain
from .riesz import NonlocalParams
from .solver import CONVERGED, SolverOptions, ansatz_initial, newton_solve

log = logging.getLogger(__name__)

COLUMNS = (
    "lambda",
    "b_minus_lambda",
    "phi",
    "j_value",
    "h1_norm",
    "h1_norm_plus",
    "h1_norm_minus",
    "residual",
    "iters",
    "status",
)
MIN_FIT_ROWS = 4


def theoretical_exponents(N: int, alpha: float, p: float):
    """``(energy_exp, norm_exp, norm_exp_valid)`` of the bifurcation rates at ``b``."""
    NonlocalParams(N, alpha, p)
    energy_exp = (2 * p - N * p + N + alpha) / (2 * p - 2)
    norm_exp = (2 - N * p + N + alpha) / (4 * p - 4)
    return energy_exp, norm_exp, bool(p < (N + alpha + 2) / N)


@dataclass
class ContinuationTable:
    b: float
    a: float
    rows: list = field(default_factory=list)
    fields: list = field(default_factory=list, repr=False)
    metadata: dict = field(default_factory=dict)

    def add(self, rec, u=None):
        self.rows.append({
            "lambda": rec.lam,
            "b_minus_lambda": self.b - rec.lam,
            "phi": rec.phi,
            "j_value": rec.j_value,
            "h1_norm": rec.h1_norm,
            "h1_norm_plus": rec.h1_norm_plus,
            "h1_norm_minus": rec.h1_norm_minus,
            "residual": rec.residual_dual_norm,
            "iters": rec.newton_iters,
            "status": rec.status,
        })
        self.fields.append(u)

    def converged_rows(self):
        return [r for r in self.rows if r["status"] == CONVERGED]

    def as_tuples(self):
        return [tuple(r[c] for c in COLUMNS) for r in self.rows]


def _check_schedule(schedule, gap: GapInfo):
    lams = [float(x) for x in schedule]
    if any(not gap.a < x < gap.b for x in lams):
        raise ValueError("schedule leaves the gap")
    if any(y >= x for x, y in zip(lams, lams[1:])):
        raise ValueError("schedule must be strictly decreasing in lambda")
    return lams


def rescaled_seed(problem: ChoquardProblem, u, b: float, lam_prev: float):
    """``u- + r u+`` with ``r = ((b - lambda)/(b - lambda_prev))^{1/(2p-2)}``."""
    p = problem.params.p
    r = ((b - problem.lam) / (b - lam_prev)) ** (1.0 / (2 * p - 2))
    um, up = problem.split(u)
    return um + r * up


def continue_branch(
    problem: ChoquardProblem,
    gap: GapInfo,
    wave: BlochEdgeWave,
    schedule,
    opts: SolverOptions | None = None,
    cutoff: CutoffSpec | None = None,
    max_step_halvings: int = 3,
) -> ContinuationTable:
    """Follow the branch seeded by the edge ansatz at the first (largest) ``lambda``.

    On failure the step from the last converged point is halved up to
    ``max_step_halvings`` times; if that fails the point is recorded and the
    run stops.
    """
    lams = _check_schedule(schedule, gap)
    table = ContinuationTable(b=gap.b, a=gap.a)
    prev = None
    for lam in lams:
        if prev is None:
            pr = problem.at(lam)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rec = newton_solve(ansatz_initial(pr, gap, wave, cutoff), pr, opts)
        else:
            rec = _step(problem, gap, prev, lam, opts, max_step_halvings)
        table.add(rec, rec.u if rec.converged else None)
        if not rec.converged:
            log.info("continuation stopped at lambda=%g (status %d)", lam, rec.status)
            if prev is not None:
                break
            continue
        prev = rec
    return table


def _step(problem, gap, prev, lam, opts, max_step_halvings):
    base = prev
    target = lam
    for _ in range(max_step_halvings + 1):
        pr = problem.at(target)
        rec = newton_solve(rescaled_seed(pr, base.u, gap.b, base.lam), pr, opts)
        if rec.converged:
            if target == lam:
                return rec
            base, target = rec, lam  # intermediate point reached; retry the full step
            continue
        target = 0.5 * (base.lam + target)
    return rec


def fit_exponent(table: ContinuationTable, column: str):
    """OLS slope and standard error of ``log(column)`` against ``log(b - lambda)``."""
    rows = table.converged_rows()
    if len(rows) < MIN_FIT_ROWS:
        raise ValueError(f"need at least {MIN_FIT_ROWS} converged rows, have {len(rows)}")
    x = np.array([r["b_minus_lambda"] for r in rows])
    y = np.array([r[column] for r in rows])
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValueError("nonpositive values cannot be fitted in log-log coordinates")
    fit = stats.linregress(np.log(x), np.log(y))
    return float(fit.slope), float(fit.stderr)


def validate_rows(table: ContinuationTable, problem: ChoquardProblem, splitting: SplittingConstants, tol: float = 1e-6):
    """Per converged row: critical identity and the two-sided splitting chain."""
    out = []
    for row, u in zip(table.rows, table.fields):
        if u is None:
            continue
        pr = problem.at(row["lambda"])
        lo, mid, hi = splitting_chain(u, pr, splitting)
        out.append({
            "lambda": row["lambda"],
            "critical_defect": critical_identity_defect(u, pr),
            "chain_ok": bool(lo <= mid * (1 + 1e-10) and mid <= hi * (1 + 1e-10)),
            "phi_positive": row["phi"] > 0,
        })
    for r in out:
        r["ok"] = r["critical_defect"] < tol and r["chain_ok"] and r["phi_positive"]
    return out


def bifurcation_point_audit(table: ContinuationTable, splitting: SplittingConstants, params: NonlocalParams, near_fraction: float = 0.25):
    """Checks (i) ``|u|_{H1}`` decreasing toward ``b`` and (ii) ``|u+|^{2p-2} ≥ c beta_lambda`` away from ``b``.

    Rows with ``b - lambda ≥ near_fraction (b - a)`` count as "away from b".
    """
    rows = sorted(table.converged_rows(), key=lambda r: r["b_minus_lambda"])
    if len(rows) < 2:
        return {"status": "insufficient data"}
    _, _, valid = theoretical_exponents(params.N, params.alpha, params.p)
    h1 = [r["h1_norm"] for r in rows]
    check_i = bool(all(x < y for x, y in zip(h1, h1[1:]))) if valid else None
    width = table.b - table.a
    far = [r for r in rows if r["b_minus_lambda"] >= near_fraction * width]
    p = params.p
    ratios = [r["h1_norm_plus"] ** (2 * p - 2) / splitting.beta_lambda(r["lambda"]) for r in far]
    c = min(ratios) if ratios else math.nan
    return {
        "status": "ok",
        "check_i_norm_to_zero": check_i,
        "check_ii_no_collapse": bool(ratios) and c > 0,
        "fitted_c": c,
        "n_far": len(far),
    }


def approach_a_study(problem: ChoquardProblem, gap: GapInfo, start, schedule, opts: SolverOptions | None = None):
    """Observational continuation toward ``a+`` from a converged record ``start``.

    Stops at the first failure (recorded). Reports whether ``|u|_{H1}`` grows over
    the last three converged rows.
    """
    lams = _check_schedule(schedule, gap)
    if lams[0] >= start.lam:
        raise ValueError("schedule must continue below the starting lambda")
    table = ContinuationTable(b=gap.b, a=gap.a)
    table.add(start, start.u)
    prev = start
    for lam in lams:
        rec = _step(problem, gap, prev, lam, opts, 3)
        table.add(rec, rec.u if rec.converged else None)
        if not rec.converged:
            break
        prev = rec
    conv = table.converged_rows()
    last = [r["h1_norm"] for r in conv[-3:]]
    table.metadata["h1_growing_last3"] = bool(len(last) == 3 and last[0] < last[1] < last[2])
    table.metadata["failure_reported"] = bool(table.rows[-1]["status"] != CONVERGED)
    return table
