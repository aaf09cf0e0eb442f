"""Run configuration: INI-style file with typed, validated keys.

Grammar: ``[section]`` headers, ``key = value`` lines, values are numbers or
quoted strings; ``#`` and ``;`` start comment lines.  Every violation is
collected before reporting.
"""
from __future__ import annotations

import ast
import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ansatz import CutoffSpec
from .grid import PotentialSpec, TorusGrid
from .riesz import NonlocalParams
from .solver import SolverOptions


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# section -> key -> (type, default)
SCHEMA = {
    "model": {
        "N": (int, 3),
        "alpha": (float, 2.0),
        "p": (float, 2.0),
        "potential": (str, "cosine"),
        "V0": (float, 15.0),
        "c0": ((float, str), "center"),
        "table": (str, ""),
    },
    "grid": {"M": (int, 4), "s": (int, 8)},
    "riesz": {"zero_mode": ((float, str), "truncated")},
    "solver": {
        "max_newton_iters": (int, 40),
        "residual_tol": (float, 1e-8),
        "krylov_tol": (float, 1e-6),
        "krylov_max_iters": (int, 300),
        "max_halvings": (int, 30),
        "max_amplitude": (float, 1e6),
    },
    "ansatz": {
        "profile": (str, "quintic"),
        "r1": (float, 1.0),
        "r2": (float, 2.0),
        "M": (int, 16),
        "R_list": (str, "2,3,4"),
        "edge_list": (str, "1,0.5,0.25,0.125,0.0625"),
    },
    "schedule": {
        "continue": (str, "0.05,0.1,0.2,0.4"),
        "approach_a": (str, "0.4,0.3,0.2,0.1,0.05,0.02"),
    },
    "output": {"dir": (str, "out")},
    "run": {"seed": (int, 0), "threads": (int, 1)},
}


@dataclass
class RunConfig:
    params: NonlocalParams
    potential: PotentialSpec
    c0: float | str
    grid: TorusGrid
    solver: SolverOptions
    cutoff: CutoffSpec
    ansatz_M: int
    R_list: list
    edge_list: list
    continue_schedule: list
    approach_schedule: list
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    def hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    """SHA-256 of the canonical resolved settings (output dir and threads excluded)."""
    keep = {s: {k: v for k, v in kv.items() if (s, k) not in (("output", "dir"), ("run", "threads"))} for s, kv in raw.items()}
    return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()[:16]


def parse_float_list(text: str) -> list:
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValueError(f"bad number list {text!r}") from exc
    if not vals:
        raise ValueError("empty number list")
    return vals


def _parse_value(raw: str):
    try:
        return ast.literal_eval(raw.strip())
    except (ValueError, SyntaxError):
        raise ValueError(f"value {raw!r} is not a number or quoted string")


def _coerce(value, typ):
    types = typ if isinstance(typ, tuple) else (typ,)
    for t in types:
        if t is int and isinstance(value, int) and not isinstance(value, bool):
            return value
        if t is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if t is str and isinstance(value, str):
            return value
    names = " or ".join(t.__name__ for t in types)
    raise ValueError(f"expected {names}, got {value!r}")


def default_raw() -> dict:
    return {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}


def parse_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file {path} not found"])
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=None)
    cp.optionxform = str
    try:
        cp.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError([f"syntax: {exc}"])
    raw = default_raw()
    errors = []
    for section in cp.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, text in cp.items(section):
            if key not in SCHEMA[section]:
                errors.append(f"unknown key {section}.{key}")
                continue
            try:
                raw[section][key] = _coerce(_parse_value(text), SCHEMA[section][key][0])
            except ValueError as exc:
                errors.append(f"{section}.{key}: {exc}")
    return build_config(raw, errors)


def build_config(raw: dict, errors=None) -> RunConfig:
    errors = list(errors or [])

    def attempt(fn, label):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            errors.append(f"{label}: {exc}")

    m = raw["model"]
    params = attempt(lambda: NonlocalParams(m["N"], m["alpha"], m["p"], _zero_mode(raw["riesz"]["zero_mode"])), "model")
    grid = attempt(lambda: TorusGrid(m["N"], raw["grid"]["M"], raw["grid"]["s"]), "grid")
    pot = attempt(lambda: _potential(m, raw["grid"]["s"]), "model.potential")
    c0 = m["c0"]
    if isinstance(c0, str) and c0 != "center":
        errors.append("model.c0: must be a number or \"center\"")
    s = raw["solver"]
    solver = attempt(lambda: SolverOptions(**s), "solver")
    a = raw["ansatz"]
    cutoff = attempt(lambda: CutoffSpec(a["r1"], a["r2"], a["profile"]), "ansatz")
    if a["M"] < 1:
        errors.append("ansatz.M: must be ≥ 1")
    R_list = attempt(lambda: parse_float_list(a["R_list"]), "ansatz.R_list")
    edge_list = attempt(lambda: parse_float_list(a["edge_list"]), "ansatz.edge_list")
    cont = attempt(lambda: _fractions(raw["schedule"]["continue"]), "schedule.continue")
    appr = attempt(lambda: _fractions(raw["schedule"]["approach_a"]), "schedule.approach_a")
    run = raw["run"]
    if run["seed"] < 0 or run["seed"] >= 2**64:
        errors.append("run.seed: must be an unsigned 64-bit integer")
    if run["threads"] < 1:
        errors.append("run.threads: must be ≥ 1")
    if errors:
        raise ConfigError(errors)
    return RunConfig(
        params=params,
        potential=pot,
        c0=c0,
        grid=grid,
        solver=solver,
        cutoff=cutoff,
        ansatz_M=a["M"],
        R_list=R_list,
        edge_list=edge_list,
        continue_schedule=cont,
        approach_schedule=appr,
        out_dir=raw["output"]["dir"],
        seed=run["seed"],
        threads=run["threads"],
        raw=raw,
    )


def _zero_mode(z):
    if isinstance(z, str):
        if z not in ("truncated", "ewald"):
            raise ValueError("zero_mode must be \"truncated\", \"ewald\" or a number")
        return None if z == "truncated" else z
    return float(z)


def _potential(m, s):
    kind = m["potential"]
    if kind not in ("zero", "cosine", "tabulated"):
        raise ValueError(f"unknown potential kind {kind!r}")
    table = None
    if kind == "tabulated":
        if not m["table"]:
            raise ValueError("tabulated potential needs model.table")
        table = np.loadtxt(m["table"], dtype=float).ravel()
        if table.size != s ** m["N"]:
            raise ValueError(f"table has {table.size} values, expected s^N = {s ** m['N']}")
    return PotentialSpec(kind, m["V0"], 0.0, table)


def _fractions(text):
    vals = parse_float_list(text)
    if any(not 0 < v < 1 for v in vals):
        raise ValueError("schedule fractions must lie in (0, 1)")
    return vals


def to_json(cfg: RunConfig) -> str:
    return json.dumps(cfg.raw, sort_keys=True)


__all__ = ["RunConfig", "ConfigError", "parse_config", "build_config", "default_raw", "config_hash", "parse_float_list", "to_json"]
