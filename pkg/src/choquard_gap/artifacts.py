"""Self-describing output files: CSV with ``#``-prefixed JSON header, JSON records."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from . import __version__


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def header_lines(meta: dict) -> list:
    meta = dict(meta)
    meta.setdefault("version", __version__)
    return ["# " + json.dumps({k: meta[k]}, sort_keys=True, default=_json_default) for k in sorted(meta)]


def write_csv(path, columns, rows, meta: dict) -> Path:
    """Rows are dicts or sequences; floats are written with ``repr`` (round-trip exact)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in header_lines(meta):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        vals = [r[c] for c in columns] if isinstance(r, dict) else list(r)
        w.writerow([_fmt(v) for v in vals])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path):
    """Return ``(meta, columns, rows)``; values stay strings."""
    meta, body = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            meta.update(json.loads(line[1:]))
        else:
            body.append(line)
    reader = csv.reader(body)
    columns = next(reader)
    return meta, columns, [row for row in reader]


def write_json(path, obj: dict, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = dict(obj)
    out["meta"] = dict(meta, version=meta.get("version", __version__))
    path.write_text(json.dumps(out, sort_keys=True, indent=1, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")
