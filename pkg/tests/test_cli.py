import json

import pytest

from choquard_gap import __version__
from choquard_gap.artifacts import read_csv
from choquard_gap.cli import main


def test_gap_command(tmp_path, capsys):
    assert main(["gap", "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["a"] < 0 < out["b"]
    saved = json.loads((tmp_path / "gap.json").read_text())
    assert saved["meta"]["version"] == __version__ and "config_hash" in saved["meta"]


def test_bands_command_is_deterministic(tmp_path):
    assert main(["bands", "--out", str(tmp_path / "a"), "--nbands", "2"]) == 0
    assert main(["bands", "--out", str(tmp_path / "b"), "--nbands", "2", "--threads", "2"]) == 0
    a = (tmp_path / "a" / "bands.csv").read_bytes()
    assert a == (tmp_path / "b" / "bands.csv").read_bytes()
    meta, cols, rows = read_csv(tmp_path / "a" / "bands.csv")
    assert cols[-1] == "eigenvalue" and len(rows) == 64 * 2
    assert meta["grid"] == {"N": 3, "M": 4, "s": 8}


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[model]\np = 1.0\n")
    assert main(["gap", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "p out of admissible range" in capsys.readouterr().err


def test_no_gap_is_reported(tmp_path, capsys):
    cfg = tmp_path / "free.ini"
    cfg.write_text('[model]\npotential = "zero"\n[grid]\nM = 2\ns = 4\n')
    assert main(["gap", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "level inside spectrum" in capsys.readouterr().err


def test_free_solve_writes_snapshot(tmp_path, capsys):
    cfg = tmp_path / "free.ini"
    cfg.write_text('[model]\npotential = "zero"\n[grid]\nM = 4\ns = 4\n')
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path), "--lambda", "-1"]) == 0
    rec = json.loads((tmp_path / "solution.json").read_text())
    assert rec["status_name"] == "converged" and rec["snapshot"] == "solution.chqf"
    assert (tmp_path / "solution.chqf").stat().st_size == 20 + 8 * 16**3


def test_lambda_outside_gap(tmp_path, capsys):
    assert main(["solve", "--out", str(tmp_path), "--lambda", "5.0"]) == 1
    assert "outside the gap" in capsys.readouterr().err


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert __version__ in capsys.readouterr().out
