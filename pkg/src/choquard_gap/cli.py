"""Command line entry point: ``choquard-gap <command> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, continuation, energy
from .ansatz import bloch_edge_wave, edge_bound_target, edge_scaling_study, riemann_lebesgue_check
from .artifacts import write_csv, write_json
from .bloch import (
    BlochDecomposition,
    GapInfo,
    SpectrumError,
    band_structure,
    bands_table,
    find_gap,
    first_gap_center,
    splitting_constants,
)
from .config import ConfigError, RunConfig, build_config, default_raw, parse_config, parse_float_list
from .energy import ChoquardProblem
from .grid import TorusGrid, make_grid, sample_potential, write_snapshot
from .solver import CONVERGED, SolverOptions, ansatz_initial, newton_solve, petviashvili
from .verify import run_all

log = logging.getLogger("choquard_gap")

EXIT_CONFIG = 1


@dataclass
class Setup:
    cfg: RunConfig
    grid: TorusGrid
    potential: np.ndarray
    c0: float
    decomp: BlochDecomposition
    gap: GapInfo | None

    def meta(self, **extra) -> dict:
        m = {
            "config_hash": self.cfg.hash(),
            "seed": self.cfg.seed,
            "grid": {"N": self.grid.N, "M": self.grid.M, "s": self.grid.s},
            "potential": {"kind": self.cfg.potential.kind, "V0": self.cfg.potential.V0, "c0": self.c0},
            "p": self.cfg.params.p,
            "alpha": self.cfg.params.alpha,
            "zero_mode": self.cfg.raw["riesz"]["zero_mode"],
            "version": __version__,
        }
        if self.gap is not None:
            m["gap"] = {"a": self.gap.a, "b": self.gap.b}
        m.update(extra)
        return m

    def problem(self, lam: float) -> ChoquardProblem:
        return ChoquardProblem(self.grid, self.potential, self.cfg.params, lam, self.decomp)


def resolve_potential(cfg: RunConfig, grid: TorusGrid, workers: int = 1):
    """Sample the potential, applying the ``c0`` shift (``"center"`` puts the first gap midpoint at 0)."""
    base = sample_potential(cfg.potential, grid)
    if cfg.c0 == "center":
        if cfg.potential.kind == "zero":
            c0 = 0.0
        else:
            c0 = -first_gap_center(band_structure(base, grid, workers=workers))
    else:
        c0 = float(cfg.c0)
    return base + c0, c0


def build_setup(cfg: RunConfig, grid: TorusGrid | None = None) -> Setup:
    grid = grid or cfg.grid
    V, c0 = resolve_potential(cfg, grid, cfg.threads)
    decomp = band_structure(V, grid, workers=cfg.threads)
    try:
        gap = find_gap(decomp, 0.0)
    except SpectrumError:
        gap = None
    return Setup(cfg, grid, V, c0, decomp, gap)


# -- commands ---------------------------------------------------------------


def cmd_bands(st: Setup, args) -> int:
    rows = bands_table(st.decomp, args.nbands)
    cols = [f"kappa_index_{i + 1}" for i in range(st.grid.N)] + ["band_index", "eigenvalue"]
    path = write_csv(Path(args.out) / "bands.csv", cols, rows, st.meta())
    print(path)
    return 0


def cmd_gap(st: Setup, args) -> int:
    if st.gap is None:
        find_gap(st.decomp, 0.0)  # raises with the reason
    print(st.gap.to_json())
    write_json(Path(args.out) / "gap.json", json.loads(st.gap.to_json()), st.meta())
    return 0


def cmd_verify(st: Setup, args) -> int:
    cos = (st.cfg.potential.V0, st.c0) if st.cfg.potential.kind == "cosine" else None
    checks = run_all(st.grid, st.potential, st.cfg.params, st.cfg.seed, cosine=cos)
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{c.name:<{width}}  {'pass' if c.passed else 'FAIL'}  worst={c.worst:.3e}  tol={c.tol:.1e}  n={c.cases}  {c.detail}")
    cols = ["check", "result", "worst", "tol", "cases", "detail"]
    write_csv(Path(args.out) / "verify.csv", cols, [c.row() for c in checks], st.meta())
    return 0 if all(c.passed for c in checks) else 1


def parse_lambda(text: str, gap: GapInfo | None) -> float:
    if text == "mid":
        if gap is None:
            raise ValueError("--lambda mid needs a gap at 0")
        return 0.5 * (gap.a + gap.b)
    return float(text)


def solve_point(st: Setup, lam: float):
    pr = st.problem(lam)
    opts = st.cfg.solver
    if st.gap is not None:
        if not st.gap.a < lam < st.gap.b:
            raise ValueError(f"lambda={lam} outside the gap ({st.gap.a}, {st.gap.b})")
        wave = bloch_edge_wave(st.decomp, st.gap)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            u0 = ansatz_initial(pr, st.gap, wave, st.cfg.cutoff)
        return newton_solve(u0, pr, opts), pr
    if np.all(pr.shifted_mu > 0):
        g = st.grid
        r2 = sum((x - g.L / 2) ** 2 for x in g.coords())
        u0 = petviashvili(pr, np.exp(-r2 / 2))
        return newton_solve(u0, pr, opts), pr
    raise ValueError("no gap at 0 and S_lambda is not positive: no seed available")


def cmd_solve(st: Setup, args) -> int:
    lam = parse_lambda(args.lam, st.gap)
    rec, pr = solve_point(st, lam)
    out = Path(args.out)
    snap = out / "solution.chqf"
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(snap, st.grid, rec.u)
    rec.snapshot = snap.name
    d = rec.to_dict()
    if st.gap is not None and rec.converged:
        split = splitting_constants(st.decomp, st.gap)
        lo, mid, hi = energy.splitting_chain(rec.u, pr, split)
        d["chain"] = {"lower": lo, "middle": mid, "upper": hi, "holds": bool(lo <= mid <= hi)}
    write_json(out / "solution.json", d, st.meta())
    print(json.dumps({k: d[k] for k in ("lambda", "status_name", "phi", "residual_dual_norm", "newton_iters")}, sort_keys=True))
    return rec.status


def _need_gap(st: Setup):
    if st.gap is None:
        raise SpectrumError("level inside spectrum: the configured potential has no gap at 0")
    return st.gap


def cmd_continue(st: Setup, args) -> int:
    gap = _need_gap(st)
    fr = sorted(parse_float_list(args.schedule)) if args.schedule else sorted(st.cfg.continue_schedule)
    lams = [gap.b - f * gap.width for f in fr]
    wave = bloch_edge_wave(st.decomp, gap)
    pr = st.problem(lams[0])
    table = continuation.continue_branch(pr, gap, wave, lams, st.cfg.solver, st.cfg.cutoff)
    split = splitting_constants(st.decomp, gap)
    params = st.cfg.params
    ee, ne, valid = continuation.theoretical_exponents(params.N, params.alpha, params.p)
    summary = {"theory": {"energy_exp": ee, "norm_exp": ne, "norm_exp_valid": valid}}
    for col in ("phi", "h1_norm"):
        try:
            summary[f"fit_{col}"] = continuation.fit_exponent(table, col)
        except ValueError as exc:
            summary[f"fit_{col}"] = str(exc)
    summary["audit"] = continuation.bifurcation_point_audit(table, split, params)
    summary["rows_valid"] = continuation.validate_rows(table, pr, split)
    meta = st.meta(caveat="gap edges are those of the discretized operator; b - lambda uses the computed b")
    out = Path(args.out)
    write_csv(out / "continuation.csv", list(continuation.COLUMNS), table.rows, meta)
    write_json(out / "continuation.json", summary, meta)
    print(json.dumps({k: summary[k] for k in ("fit_phi", "fit_h1_norm")}))
    conv = table.converged_rows()
    return 0 if len(conv) == len(table.rows) else table.rows[-1]["status"]


def cmd_ansatz(st: Setup, args) -> int:
    cfg = st.cfg
    gap = _need_gap(st)
    wave = bloch_edge_wave(st.decomp, gap)
    big = make_grid(st.grid.N, cfg.ansatz_M, st.grid.s)
    V = sample_potential(cfg.potential, big) + st.c0
    rl = riemann_lebesgue_check(wave, cfg.cutoff, cfg.params, cfg.R_list, big)
    dbig = band_structure(V, big, workers=cfg.threads)
    lams = [gap.b - d for d in sorted(cfg.edge_list, reverse=True)]
    rows, slopes = edge_scaling_study(dbig, gap, wave, cfg.cutoff, cfg.params, V, lams)
    bound = edge_bound_target(wave, cfg.cutoff, cfg.params, big)
    meta = st.meta(ansatz_grid={"N": big.N, "M": big.M, "s": big.s}, cutoff=vars(cfg.cutoff))
    out = Path(args.out)
    write_csv(out / "ansatz_riemann_lebesgue.csv", ["R", "scaled_j", "target", "unit_target", "rel_gap"], rl, meta)
    write_csv(out / "ansatz_edge_scaling.csv", ["b_minus_lambda", "R", "p0_h1", "q_zeta", "j_scaled"], rows, meta)
    write_json(out / "ansatz.json", {"slopes": slopes, "liminf_bound": bound, "kappa_b": list(wave.kappa_frac)}, meta)
    print(json.dumps({"rel_gap_last": rl[-1]["rel_gap"], "slopes": slopes}))
    return 0


def cmd_approach_a(st: Setup, args) -> int:
    gap = _need_gap(st)
    fr = sorted(parse_float_list(args.schedule), reverse=True) if args.schedule else sorted(st.cfg.approach_schedule, reverse=True)
    lam0 = parse_lambda(args.lam or "mid", gap)
    start, _ = solve_point(st, lam0)
    if start.status != CONVERGED:
        print("starting point did not converge", file=sys.stderr)
        return start.status
    lams = [gap.a + f * gap.width for f in fr if gap.a + f * gap.width < lam0]
    table = continuation.approach_a_study(st.problem(lam0), gap, start, lams, st.cfg.solver)
    out = Path(args.out)
    meta = st.meta(**table.metadata)
    write_csv(out / "approach_a.csv", list(continuation.COLUMNS), table.rows, meta)
    print(json.dumps(table.metadata))
    return 0


COMMANDS = {
    "bands": cmd_bands,
    "gap": cmd_gap,
    "verify": cmd_verify,
    "solve": cmd_solve,
    "continue": cmd_continue,
    "ansatz": cmd_ansatz,
    "approach-a": cmd_approach_a,
}


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="configuration file")
    common.add_argument("--out", help="output directory (overrides [output] dir)")
    common.add_argument("--threads", type=int, help="worker threads for per-quasimomentum eigensolves")
    common.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="choquard-gap", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name in ("solve", "approach-a"):
            p.add_argument("--lambda", dest="lam", default="mid" if name == "solve" else None, help="VALUE or 'mid'")
        if name in ("continue", "approach-a"):
            p.add_argument("--schedule", help="comma-separated gap fractions")
        if name == "bands":
            p.add_argument("--nbands", type=int, default=8)
    return parser


def load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else build_config(default_raw())
    raw = cfg.raw
    if args.seed is not None:
        raw["run"]["seed"] = args.seed
    if args.threads is not None:
        raw["run"]["threads"] = args.threads
    if args.out is not None:
        raw["output"]["dir"] = args.out
    cfg = build_config(raw)
    args.out = cfg.out_dir
    return cfg


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        st = build_setup(cfg)
        return COMMANDS[args.command](st, args)
    except (ValueError, SpectrumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
