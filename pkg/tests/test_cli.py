import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from quasigeo import shapes
from quasigeo.cli import main
from quasigeo.errors import EXIT_CODES
from quasigeo.mesh import write_mesh


@pytest.fixture
def tetra_off(tmp_path):
    p = tmp_path / "tetra.off"
    write_mesh(shapes.tetrahedron(), p)
    return p


@pytest.fixture
def strip_pair(tmp_path):
    a = shapes.grid_strip(6, 3, 3.0, 1.5, jitter=0.25, seed=3)
    b = shapes.grid_strip(6, 3, 3.0, 1.5, jitter=0.25, seed=4)
    pa, pb = tmp_path / "sa.off", tmp_path / "sb.off"
    write_mesh(a, pa)
    write_mesh(b, pb)
    return pa, pb


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_distances_tetrahedron(tmp_path, tetra_off, capsys):
    out = tmp_path / "out"
    cache = tmp_path / "cache"
    code, stdout, _ = run(["distances", tetra_off, "--out", out, "--cache-dir", cache], capsys)
    assert code == 0
    rows = list(csv.reader((out / "tetra.distances.csv").open()))
    d = np.array(rows, dtype=float)
    assert d.shape == (4, 4)
    assert np.array_equal(d, d.T)
    np.testing.assert_allclose(d[~np.eye(4, dtype=bool)], 1.0, rtol=1e-12)
    assert np.all(np.diag(d) == 0)
    assert len(list(cache.glob("*.qgd"))) == 1
    rec = json.loads((out / "tetra.distances.json").read_text())
    assert rec["config"]["k0"] == 20 and rec["config"]["cache_dir"] == str(cache)
    assert "threads" not in rec["config"]
    assert (out / "tetra.distances.png").exists()
    assert str(out / "tetra.distances.csv") in stdout.splitlines()


def test_every_command_and_determinism(tmp_path, strip_pair, capsys):
    pa, pb = strip_pair
    cache = tmp_path / "cache"
    cmds = [["spectrum", pa], ["symmetry", pa, "--eps-mode", "config", "--eps", "0.05"],
            ["correspond", pa, pb], ["stable", pa, pb], ["eval", pa, pb]]
    out = tmp_path / "out"
    snapshots = []
    for threads in (1, 2):
        for c in cmds:
            code, _, err = run(c + ["--k0", "5", "--out", out, "--cache-dir", cache,
                                    "--threads", str(threads)], capsys)
            assert code == 0, err
        snapshots.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert snapshots[0].keys() == snapshots[1].keys()
    for name, blob in snapshots[0].items():
        assert blob == snapshots[1][name], name
    a = set(snapshots[0])
    assert {"sa.spectrum.json", "sa.phi2.ply", "sa.symmetry_pairs.csv", "sa__sb.correspond.json",
            "sa__sb.stable.json", "sa__sb.eval.json", "sa__sb.curve.csv", "sa__sb.curve.png"} <= a
    corr = json.loads(snapshots[0]["sa__sb.correspond.json"])
    assert set(corr["c_xy"]) == {"raw", "per_k0", "per_n"}
    ev = json.loads(snapshots[0]["sa__sb.eval.json"])
    assert ev["pairs"][0]["shape_x"] == "sa"


def test_no_figures(tmp_path, tetra_off, capsys):
    out = tmp_path / "o"
    code, _, _ = run(["distances", tetra_off, "--out", out, "--no-cache", "--no-figures"], capsys)
    assert code == 0
    assert not list(out.glob("*.png"))


def test_cache_env_var(tmp_path, tetra_off, capsys, monkeypatch):
    cache = tmp_path / "envcache"
    monkeypatch.setenv("QUASIGEO_CACHE_DIR", str(cache))
    code, _, _ = run(["distances", tetra_off, "--out", tmp_path / "o"], capsys)
    assert code == 0
    assert len(list(cache.glob("*.qgd"))) == 1


def test_cache_reused_across_commands(tmp_path, tetra_off, capsys):
    cache = tmp_path / "c"
    run(["distances", tetra_off, "--out", tmp_path / "o", "--cache-dir", cache], capsys)
    (f,) = cache.glob("*.qgd")
    stamp = f.stat().st_mtime_ns
    code, _, _ = run(["spectrum", tetra_off, "--k0", "2", "--out", tmp_path / "o", "--cache-dir", cache],
                     capsys)
    assert code == 0
    assert f.stat().st_mtime_ns == stamp


def error_record(err):
    rec = json.loads(err.strip().splitlines()[-1])
    assert set(rec) == {"error", "message", "exit_code"}
    return rec


def test_usage_errors(tmp_path, tetra_off, capsys):
    code, _, err = run(["symmetry", tetra_off, tetra_off], capsys)
    assert code == EXIT_CODES["usage"] == error_record(err)["exit_code"]
    code, _, err = run(["frobnicate", tetra_off], capsys)
    assert code == EXIT_CODES["usage"]
    code, _, err = run(["distances", tetra_off, "--tol", "-1"], capsys)
    assert code == EXIT_CODES["usage"]


def test_missing_file(tmp_path, capsys):
    code, _, err = run(["distances", tmp_path / "nope.off", "--out", tmp_path / "o"], capsys)
    assert code == EXIT_CODES["FileNotFoundError"] == 3
    assert error_record(err)["error"] == "FileNotFoundError"


def test_parse_error_code(tmp_path, capsys):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n")
    code, _, err = run(["distances", p, "--out", tmp_path / "o", "--no-cache"], capsys)
    assert code == EXIT_CODES["ParseError"]
    assert error_record(err)["error"] == "ParseError"


def test_shape_mismatch_code(tmp_path, tetra_off, strip_pair, capsys):
    code, _, err = run(["correspond", tetra_off, strip_pair[0], "--out", tmp_path / "o", "--no-cache",
                        "--k0", "2"], capsys)
    assert code == EXIT_CODES["ShapeMismatch"]


def test_exit_codes_are_distinct():
    codes = [c for k, c in EXIT_CODES.items()]
    assert len(codes) == len(set(codes))


def test_console_entry_point(tmp_path, tetra_off):
    r = subprocess.run([sys.executable, "-m", "quasigeo.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.startswith("quasigeo ")
