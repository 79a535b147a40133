import json
import os

import numpy as np
import pytest

from llblow.cli import dispatch


def test_modulation_subcommand(tmp_path):
    out = tmp_path / "mod"
    rc = dispatch(["modulation", "--b0", "0.01", "--s-end", "5e3",
                   "--fit", "--out", str(out)])
    assert rc == 0
    rows = (out / "modulation_trajectory.csv").read_text().splitlines()
    assert rows[0] == "s,t,a,b,lambda,theta,kappa"
    assert len(rows) > 100
    report = json.loads((out / "modulation_report.json").read_text())
    assert 0 < report["final_sb"] <= 1.0
    assert "fit" in report
    assert (out / "lambda_vs_t.dat").exists()
    assert (out / "rate_law_overlay.dat").exists()


def test_modulation_reproducible(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        rc = dispatch(["modulation", "--b0", "0.02", "--s-end", "2e3",
                       "--out", str(out)])
        assert rc == 0
    assert (out1 / "modulation_trajectory.csv").read_bytes() == \
        (out2 / "modulation_trajectory.csv").read_bytes()


def test_modulation_shoot(tmp_path):
    out = tmp_path / "shoot"
    rc = dispatch(["modulation", "--b0", "0.01", "--s-end", "3e3",
                   "--shoot", "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "modulation_report.json").read_text())
    assert report["shoot_a0"] == 0.0


def test_profiles_subcommand(tmp_path):
    out = tmp_path / "prof"
    rc = dispatch(["profiles", "--b", "1e-3", "--rho1", "1", "--rho2", "1",
                   "--grid-nodes", "4000", "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "profiles_summary.json").read_text())
    assert summary["c_b"] > 0
    assert "flux_rel_err" in summary
    names = os.listdir(out)
    assert "sigma_b.csv" in names and "phi_M.csv" in names
    assert "phi_20.csv" in names and "phi_03.csv" in names
    header = (out / "w0_localized.csv").read_text().splitlines()[0]
    assert header == "y,alpha,beta,gamma"


def test_verify_subcommand_selected(tmp_path):
    out = tmp_path / "ver"
    rc = dispatch(["verify", "--checks", "wronskian,morawetz-numerology",
                   "--out", str(out)])
    assert rc == 0
    reports = json.loads((out / "verify_report.json").read_text())
    assert len(reports) == 2
    assert all(r["passed"] for r in reports)
    assert all("statement" in r for r in reports)


def test_verify_unknown_check_is_config_error(tmp_path):
    rc = dispatch(["verify", "--checks", "bogus", "--out",
                   str(tmp_path / "x")])
    assert rc == 2


def test_simulate_config_validation(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1,
                               "coefficients": {"rho1": 1, "rho2": -1}}))
    rc = dispatch(["simulate", "--config", str(bad),
                   "--out", str(tmp_path / "o")])
    assert rc == 2
    bad2 = tmp_path / "bad2.json"
    bad2.write_text(json.dumps({"schema_version": 99}))
    assert dispatch(["simulate", "--config", str(bad2),
                     "--out", str(tmp_path / "o")]) == 2


def test_simulate_short_run(tmp_path):
    cfg = {
        "schema_version": 1,
        "coefficients": {"rho1": 0.0, "rho2": 1.0},
        "seed": {"b0": 0.05},
        "grid": {"n_nodes": 1024, "profile_nodes": 1500},
        "stepping": {"extract_every": 4000},
        "stop": {"stop_ratio": 0.8, "t_budget": 3.0},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "sim"
    rc = dispatch(["simulate", "--config", str(path), "--out", str(out)])
    assert rc == 0
    rows = (out / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,s,lambda,theta,a,b,E,E1,E2,E4"
    assert len(rows) >= 3
    report = json.loads((out / "run_report.json").read_text())
    assert report["energy_monotone"] is True
    assert report["stopped_on"] in ("scale-collapse", "budget")


def test_fit_subcommand(tmp_path):
    t = np.linspace(0.2, 0.95, 40)
    x = 1.0 - t
    lam = 2.0 * x / np.abs(np.log(x)) ** 2
    csv = tmp_path / "traj.csv"
    lines = ["t,lambda"] + [f"{ti},{li}" for ti, li in zip(t, lam)]
    csv.write_text("\n".join(lines) + "\n")
    out = tmp_path / "fit"
    rc = dispatch(["fit", "--csv", str(csv), "--out", str(out)])
    assert rc == 0
    rep = json.loads((out / "fit_report.json").read_text())
    assert rep["T"] == pytest.approx(1.0, abs=1e-5)
    assert rep["p"] == pytest.approx(2.0, abs=1e-4)
