import csv

import numpy as np
import pytest

from arselect.cli import main


def _csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_theory_curve_white_noise(tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["theory-curve", "--spec", "whitenoise", "--n", "100", "--kmax", "10", "--out", str(out)]) == 0
    rows = _csv(out)
    assert [float(r["L_n"]) for r in rows] == [k / 90 for k in range(1, 11)]
    assert [int(r["k_star"]) for r in rows] == [1] + [0] * 9


def test_identity_check(capsys):
    assert main(["identity-check", "--spec", "ma1:0.8", "--paths", "100"]) == 0
    out = dict(line.split(",") for line in capsys.readouterr().out.splitlines())
    assert float(out["decomposition_max_residual"]) <= 1e-8
    assert float(out["normal_equation_max_residual"]) <= 1e-10


def test_simulate_fit_select_pipeline(tmp_path, capsys):
    path = tmp_path / "path.csv"
    assert main(["simulate", "--spec", "ma1:0.8", "--n", "60", "--seed", "3", "--out", str(path)]) == 0
    again = tmp_path / "again.csv"
    main(["simulate", "--spec", "ma1:0.8", "--n", "60", "--seed", "3", "--out", str(again)])
    assert path.read_bytes() == again.read_bytes()
    fit = tmp_path / "fit.csv"
    assert main(["fit", "--input", str(path), "--out", str(fit)]) == 0
    rows = _csv(fit)
    assert len(rows) == 7
    assert main(["select", "--input", str(path), "--criteria", "aic,sn,aic_alpha:3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "criterion,k_hat" and len(lines) == 4


def test_basin_and_asymptotics(tmp_path):
    out = tmp_path / "basin.csv"
    assert main(["basin", "--spec", "whitenoise", "--n", "50", "--kmax", "5", "--out", str(out)]) == 0
    assert [float(r["ratio"]) for r in _csv(out)] == pytest.approx([1.0] * 4)
    out = tmp_path / "asym.csv"
    assert main(["asymptotics-check", "--spec", "expdecay:0.5,0.8", "--out", str(out)]) == 0
    assert all(r["ok"] == "1" for r in _csv(out))


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["simulate", "--spec", "ma1:0.8", "--n", "10", "--frobnicate"],
    ["simulate", "--n", "10"],
    ["simulate", "--spec", "ma1:3", "--n", "10"],
    ["simulate", "--config", "/nonexistent.ini", "--n", "10"],
    ["fit", "--input", "/nonexistent.csv"],
    ["theory-curve", "--spec", "whitenoise", "--n", "10", "--kmax", "10"],
    ["run", "--config", "/nonexistent.ini"],
    ["table2", "--reps", "0"],
    ["table2", "--jobs", "0"],
    ["asymptotics-check", "--spec", "ma1:0.5"],
])
def test_config_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_degenerate_input_exit_2(tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("t,x\n" + "".join(f"{t},1.0\n" for t in range(1, 41)))
    assert main(["fit", "--input", str(path), "--kmax", "4"]) == 2


def test_table_jobs_invariance_and_reference(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["table2", "--reps", "700", "--seed", "1", "--theta", "0.8", "--cells", "60:7,120:10"]
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    ref = tmp_path / "ref.csv"
    ref.write_text("phi0,theta0,n,K_n,statistic,value,tol\n0,0.8,60,7,r_star:aic,100,0.1\n")
    assert main(base + ["--out", str(b), "--reference", str(ref)]) == 3
    assert main(base + ["--out", str(b), "--reference", "bundled"]) == 0


def test_run_config(tmp_path):
    ini = tmp_path / "exp.ini"
    ini.write_text("[process]\nkind = arma\nphi = 0.5\ntheta = 0.8\n\n"
                   "[experiment]\ncells = 120\nreps = 200\ncriteria = aic,fpe\nseed = 3\n")
    out = tmp_path / "run.csv"
    assert main(["run", "--config", str(ini), "--out", str(out)]) == 0
    rows = _csv(out)
    stats = {r["statistic"] for r in rows}
    assert {"pe:aic", "pe:fpe", "gamma_opt", "m_hat:k=10"} <= stats
    assert {(r["n"], r["K_n"]) for r in rows} == {("120", "10")}
    g = next(r for r in rows if r["statistic"] == "gamma_opt")
    assert 0 < float(g["value"]) < 1.5
    assert np.isfinite(float(g["stderr"]))
