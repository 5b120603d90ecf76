import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mabd import fixture_builders as fb
from mabd.cli import main


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_pendulum_run_writes_rows(tmp_path, capsys):
    out = tmp_path / "pendulum.csv"
    assert main(["run", "pendulum", "--steps", "5000", "--out", str(out)]) == 0
    header, data = read_csv(out)
    assert data.shape[0] == 5001
    assert data[-1, 0] == pytest.approx(0.5)
    assert data[:, header.index("joint0_residual")].max() <= 1e-6
    assert "wrote 5001 rows" in capsys.readouterr().out


def test_golden_header(tmp_path):
    out = tmp_path / "p.csv"
    main(["run", "pendulum", "--steps", "1", "--out", str(out)])
    header, _ = read_csv(out)
    body = ["A00", "A01", "A02", "A10", "A11", "A12", "A20", "A21", "A22", "tx", "ty", "tz"]
    expect = ["time"] + [f"body{i}_{c}" for i in range(2) for c in body]
    expect += ["joint0_residual", "joint1_residual", "px", "py", "pz", "Lx", "Ly", "Lz", "energy", "us_per_step"]
    assert header == expect


def test_dense_matches_chain(tmp_path):
    paths = {}
    for solver in ("dense", "chain"):
        paths[solver] = tmp_path / f"{solver}.csv"
        assert main(["run", "chain", "--steps", "100", "--solver", solver, "--no-timing",
                     "--out", str(paths[solver])]) == 0
    _, a = read_csv(paths["dense"])
    _, b = read_csv(paths["chain"])
    # columns that hover at round-off get an O(1) scale
    scale = np.maximum(np.abs(a).max(axis=0), 1.0)
    assert (np.abs(a - b) / scale).max() <= 1e-8


def test_repeat_runs_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        p = tmp_path / f"r{k}.csv"
        main(["run", "tree", "--steps", "30", "--no-timing", "--out", str(p)])
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_step_override_and_polar(tmp_path):
    p = tmp_path / "c.csv"
    assert main(["run", "chain", "--steps", "10", "--h", "5e-4", "--polar", "off", "--out", str(p)]) == 0
    _, data = read_csv(p)
    assert data[-1, 0] == pytest.approx(5e-3)


def test_missing_file(capsys):
    assert main(["run", "no/such/scene.json"]) == 2
    assert "no/such/scene.json" in capsys.readouterr().err
    assert main(["validate", "no/such/scene.json"]) == 2


def test_non_unit_axis_names_joint(tmp_path, capsys):
    d = fb.chain(n=2)
    d["joints"][1].update(name="knee", axis=[0, 1.5, 0])
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    assert main(["validate", str(p)]) == 2
    assert "knee" in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{"bodies": [}')
    assert main(["run", str(p)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_validate_ring(capsys):
    assert main(["validate", "ring"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("Loop(breakers=1), 6 joints, max residual")


def test_validate_net(capsys):
    assert main(["validate", str(fb.fixture_path("net"))]) == 0
    assert "Graph, 220 joints" in capsys.readouterr().out


def test_solver_failure_exit(tmp_path):
    d = fb.ring()
    d["integrator"]["solver"] = "chain"
    p = tmp_path / "ring.json"
    p.write_text(json.dumps(d))
    assert main(["run", str(p), "--steps", "1"]) == 3


def test_bench_unknown_suite(capsys):
    assert main(["bench", "nope"]) == 2


def test_bench_suite_writes_summary(tmp_path, capsys):
    assert main(["bench", "tree_aba", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "summary.csv").read_text()
    assert text.startswith("suite,metric,value,comparator,tolerance,status,runtime_s")
    assert "tree_aba,min_touches,2" in text


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "mabd.cli", "validate", "minimal"], capture_output=True, text=True)
    assert r.returncode == 0 and "Free" in r.stdout
