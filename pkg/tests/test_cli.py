import json

import numpy as np
import pytest

from negrefract import fileio
from negrefract.cli import main

S = 0.99498743710662
TWO = [
    {"direction": [0.1, 0.0, S], "energy": 0.18},
    {"direction": [-0.1, 0.0, S], "energy": 0.18},
]


def config(**over):
    cfg = {
        "medium": {"n1": 1.0, "n2": -1.5, "z1": 1.0, "z2": 1.2},
        "source": {"cap": {"axis": [0, 0, 1], "radius": 0.4}, "grid_size": 4000},
        "target": {"cap": {"axis": [0, 0, 1], "radius": 0.3}, "points": TWO},
        "solver": {"rel_tol": 0.01},
    }
    cfg.update(over)
    return cfg


@pytest.fixture
def workdir(tmp_path):
    def make(cfg):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        return p
    return tmp_path, make


@pytest.fixture
def solved(workdir):
    tmp, make = workdir
    cfg = make(config())
    assert main(["solve", "--config", str(cfg), "--out", str(tmp / "out")]) == 0
    return tmp, cfg


def test_solve_writes_artifacts(solved, capsys):
    tmp, _ = solved
    out = tmp / "out"
    for name in ["solution.json", "report.json", "surface.obj", "surface.csv"]:
        assert (out / name).exists()
    rep = fileio.read_json(out / "report.json")
    assert rep["converged"] and rep["max_residual"] <= 0.01
    assert rep["admissibility"]["margin"] > 0
    sol = fileio.read_json(out / "solution.json")
    assert sol["regime"] == "HyperboloidMax" and sol["b"][0] == 1.0


def test_verify_pass_and_tamper(solved, capsys):
    tmp, cfg = solved
    sol_path = tmp / "out" / "solution.json"
    assert main(["verify", "--config", str(cfg), "--solution", str(sol_path), "--out", str(tmp / "v")]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")
    assert fileio.read_json(tmp / "v" / "verify.json")["passed"]
    data = fileio.read_json(sol_path)
    data["b"][1] *= 1.05
    bad = tmp / "bad.json"
    fileio.write_json(bad, data)
    assert main(["verify", "--config", str(cfg), "--solution", str(bad)]) == 1
    assert capsys.readouterr().out.strip().endswith("FAIL")


def test_lossless_solve_and_verify(workdir):
    tmp, make = workdir
    cfg = make(config())
    assert main(["solve", "--config", str(cfg), "--out", str(tmp / "o"), "--lossless"]) == 0
    assert fileio.read_json(tmp / "o" / "report.json")["lossless"] is True
    sol = str(tmp / "o" / "solution.json")
    assert main(["verify", "--config", str(cfg), "--solution", sol, "--lossless"]) == 0


def test_admissibility_exit_code(workdir, capsys):
    tmp, make = workdir
    far = [{"direction": [0.1, 0.0, -S], "energy": 0.1}, {"direction": [-0.1, 0.0, -S], "energy": 0.1}]
    cfg = make(config(target={"cap": {"axis": [0, 0, -1], "radius": 0.3}, "points": far}))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp / "o")]) == 3
    assert "admissibility" in capsys.readouterr().err


def test_budget_exit_code(workdir, capsys):
    tmp, make = workdir
    big = [dict(t, energy=1.0) for t in TWO]
    cfg = make(config(target={"cap": {"axis": [0, 0, 1], "radius": 0.3}, "points": big}))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp / "o")]) == 4
    assert "energy budget" in capsys.readouterr().err


def test_configuration_and_io_exit_codes(workdir):
    tmp, make = workdir
    cfg = make(config(regime="EllipsoidMin"))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp / "o")]) == 2
    assert main(["solve", "--config", str(tmp / "missing.json"), "--out", str(tmp / "o")]) == 6


def test_ma_residual_refuses_piecewise_without_per_cell(solved, capsys):
    tmp, cfg = solved
    sol = str(tmp / "out" / "solution.json")
    assert main(["ma-residual", "--config", str(cfg), "--solution", sol]) == 8
    assert "--per-cell" in capsys.readouterr().err
    code = main(["ma-residual", "--config", str(cfg), "--solution", sol, "--per-cell", "--points", "20",
                 "--out", str(tmp / "ma")])
    assert code == 0
    assert fileio.read_json(tmp / "ma" / "ma_residual.json")["points"] == 20


def test_ma_residual_smooth_field(workdir, capsys):
    tmp, make = workdir
    cfg = make(config())
    field = {
        "type": "quadric", "m": [0, 0, 1], "b": 1.0,
        "perturbation": {"amplitude": 0.01, "center": [0.05, 0.0], "width": 0.1},
        "points": [[0.05, 0.0], [0.06, 0.01], [0.04, -0.02]],
    }
    (tmp / "field.json").write_text(json.dumps(field))
    assert main(["ma-residual", "--config", str(cfg), "--field", str(tmp / "field.json")]) == 0
    assert capsys.readouterr().out.strip().endswith("PASS")


def test_discretize_and_export(workdir, solved):
    tmp, make = workdir
    c = config()
    c["target"] = {"cap": {"axis": [0, 0, 1], "radius": 0.3}, "density": {"kind": "Uniform", "value": 0.5},
                   "cell_count": 6, "fine_nodes": 3000}
    cfg = make(c)
    assert main(["discretize-target", "--config", str(cfg), "--out", str(tmp / "d")]) == 0
    targets = fileio.read_json(tmp / "d" / "targets.json")
    assert len(targets) == 6
    assert np.isclose(sum(t["energy"] for t in targets), 0.5 * 2 * np.pi * (1 - np.cos(0.3)), rtol=1e-3)
    sol = str(tmp / "out" / "solution.json")
    assert main(["export-mesh", "--config", str(tmp / "cfg.json"), "--solution", sol, "--out", str(tmp / "m")]) == 0
    assert (tmp / "m" / "surface.obj").exists()
