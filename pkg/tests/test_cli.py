import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from sphg.cli import run
from sphg.geometry import load_points
from sphg.quadrature import load_rule


def test_points_and_weights(tmp_path, capsys):
    pts = tmp_path / "y.txt"
    assert run(["points", "--family", "icosahedral", "--n", "642", "--out", str(pts)]) == 0
    assert len(load_points(pts)) == 642
    rule = tmp_path / "y.rule"
    assert run(["weights", "--points", str(pts), "--M", "2", "--out", str(rule)]) == 0
    out = capsys.readouterr().out
    assert "N_Y=642" in out and "positive=True" in out
    assert math.fsum(load_rule(rule).weights) == pytest.approx(4 * math.pi, abs=1e-10)


def test_solve_writes_record_and_matrix(tmp_path, capsys):
    x, y = tmp_path / "x.txt", tmp_path / "y.txt"
    run(["points", "--family", "fibonacci", "--n", "100", "--out", str(x)])
    run(["points", "--family", "fibonacci", "--n", "1500", "--out", str(y)])
    code = run(["solve", "--x", str(x), "--y", str(y), "--n-eval", "5000",
                "--out", str(tmp_path / "s"), "--export-matrix", str(tmp_path / "a.mtx")])
    assert code == 0
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "sweep,size,h,error,kappa2,wall_ms" and len(lines) == 2
    row = lines[1].split(",")
    assert row[0] == "solve" and int(row[1]) == 1500
    assert 0 < float(row[3]) < 1e-2 and float(row[4]) > 1
    assert (tmp_path / "a.mtx").read_text().startswith("%%MatrixMarket")
    assert json.loads((tmp_path / "s.json").read_text())["config"]["x_sizes"] == [100]


def test_usage_errors(tmp_path, capsys):
    assert run([]) == 2
    assert run(["bogus"]) == 2
    assert run(["points", "--family", "cube", "--n", "5", "--out", "p.txt"]) == 2
    assert run(["points", "--family", "fibonacci", "--n", "0", "--out", str(tmp_path / "p")]) == 2
    assert run(["sweep-interp", "--x-sizes", "1,x"]) == 2
    assert run(["sweep-interp", "--config", str(tmp_path / "missing.json")]) == 2
    assert "error" in capsys.readouterr().err


def test_runtime_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 0 1\n1 0\n")
    assert run(["weights", "--points", str(bad), "--out", str(tmp_path / "r")]) == 1
    assert run(["weights", "--points", str(tmp_path / "none.txt"), "--out", str(tmp_path / "r")]) == 1
    # invalid config values are runtime (library) errors
    assert run(["sweep-interp", "--x-sizes", "200,100,50"]) == 1
    assert "InvalidArgumentError" in capsys.readouterr().err


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"x_source": "fibonacci", "x_sizes": [50, 100, 200], "n_eval": 5000, "m": 3}))
    out = tmp_path / "interp"
    assert run(["sweep-interp", "--config", str(cfg), "--m", "2", "--out", str(out)]) == 0
    d = json.loads((tmp_path / "interp.json").read_text())
    assert d["config"]["m"] == 2 and d["config"]["x_sizes"] == [50, 100, 200]
    assert d["rate"] > 1.5
    cfg.write_text(json.dumps({"x_sizes": [50, 100, 200], "colour": "red"}))
    assert run(["sweep-interp", "--config", str(cfg)]) == 1


def test_threads_from_environment(tmp_path, monkeypatch):
    args = ["sweep-interp", "--x-sizes", "50,100,200", "--n-eval", "5000", "--out", str(tmp_path / "t")]
    monkeypatch.setenv("SPHG_THREADS", "3")
    assert run(args) == 0
    d = json.loads((tmp_path / "t.json").read_text())
    assert d["config"]["threads"] == 3 and d["info"]["threads"] == 3
    assert run(args + ["--threads", "2"]) == 0
    assert json.loads((tmp_path / "t.json").read_text())["config"]["threads"] == 2
    monkeypatch.setenv("SPHG_THREADS", "many")
    assert run(args) == 2


def test_console_script(tmp_path):
    exe = shutil.which("sphg")
    if exe is None:
        pytest.skip("package not installed")
    p = subprocess.run([exe, "points", "--family", "fibonacci", "--n", "10",
                        "--out", str(tmp_path / "p.txt")], capture_output=True, text=True)
    assert p.returncode == 0
    assert np.allclose(np.linalg.norm(load_points(tmp_path / "p.txt").points, axis=1), 1.0)
    assert subprocess.run([exe], capture_output=True).returncode == 2
