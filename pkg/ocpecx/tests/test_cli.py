"""Command-line tests."""

import json
import time

import numpy as np
import pandas as pd
import pytest

from ocpecx.app import main
from ocpecx.resources import RESOURCES_PATH

LCS = str(RESOURCES_PATH / "lcs_scalar.json")


def read_report(out):
    return json.loads((out / "report.json").read_text(encoding="utf-8"))


@pytest.fixture(name="simulated")
def fixture_simulated(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--problem", LCS, "--nodes", "11", "--out", str(out)]) == 0
    return out


def test_simulate_writes_trajectory(simulated):
    frame = pd.read_csv(simulated / "trajectory.csv")
    assert list(frame.columns) == ["t", "x1", "u1"]
    assert len(frame) == 12
    report = read_report(simulated)
    assert report["status"] == "ok"
    assert report["N"] == 11
    assert report["simulate"]["lcp_residual"] <= 1e-10
    assert report["config"]["nodes"] == 11


def test_check_simulated_trajectory(simulated, tmp_path):
    out = tmp_path / "check"
    code = main(["check", "--problem", LCS, "--traj", str(simulated / "trajectory.csv"), "--out", str(out)])
    assert code == 0
    report = read_report(out)
    assert report["aggregate"]["label_lambda"] == "S"
    assert report["aggregate"]["label_eta"] == "S"
    assert report["divergence"]["nodes"] == []
    assert report["lambda0"] == 1
    assert report["crosscheck"]["failed_nodes"] == []
    assert report["weierstrass"]["violations"] == []
    assert len(pd.read_csv(out / "multipliers.csv")) == 11
    assert len(pd.read_csv(out / "adjoint.csv")) == 12


def test_reports_are_reproducible(simulated, tmp_path):
    out = tmp_path / "repeat"
    args = ["check", "--problem", LCS, "--traj", str(simulated / "trajectory.csv"), "--out", str(out), "--seed", "5"]
    assert main(args) == 0
    first = (out / "report.json").read_bytes()
    assert main(args) == 0
    assert (out / "report.json").read_bytes() == first


def test_check_rejects_infeasible_trajectory(tmp_path):
    traj = tmp_path / "bad.csv"
    pd.DataFrame({"t": [0.0, 0.5, 1.0], "x1": [1.0, 1.0, 1.0], "u1": [0.0, 0.0, 0.0]}).to_csv(traj, index=False)
    out = tmp_path / "out"
    assert main(["check", "--problem", "builtin:counterexample", "--traj", str(traj), "--out", str(out)]) == 2
    error = read_report(out)["error"]
    assert error["stage"] == "check"
    assert error["type"] == "InfeasiblePointError"
    assert error["max_residual"] == pytest.approx(1.0)


def test_cq_audit(simulated, tmp_path):
    out = tmp_path / "cq"
    assert main(["cq", "--problem", LCS, "--traj", str(simulated / "trajectory.csv"), "--out", str(out)]) == 0
    cq = read_report(out)["cq"]
    assert cq["linear_condition"] is True
    assert cq["licq_fails"] == []
    assert len(cq["nodes"]) == 11
    assert cq["nodes"][0]["bounded_slope"]["radius_ratio"] == "inf"


def test_pipeline_on_counterexample(tmp_path):
    out = tmp_path / "pipe"
    code = main(["pipeline", "--problem", "builtin:counterexample", "--nodes", "10", "--samples", "20", "--out", str(out)])
    assert code == 0
    report = read_report(out)
    assert report["solve"]["status"] == "converged"
    assert report["lambda0"] == 1
    assert len(report["per_node"]) == 10
    assert report["cq"]["linear_condition"] is False
    assert "simulate" not in report
    for name in ("trajectory.csv", "multipliers.csv", "adjoint.csv"):
        assert (out / name).exists()


def test_dimension_error_names_the_field(tmp_path):
    problem = tmp_path / "bad.json"
    problem.write_text(json.dumps({**json.loads((RESOURCES_PATH / "lcs_scalar.json").read_text()), "B": [[1.0, 2.0]]}))
    out = tmp_path / "out"
    assert main(["simulate", "--problem", str(problem), "--out", str(out)]) == 1
    error = read_report(out)["error"]
    assert error["stage"] == "load"
    assert error["type"] == "DimensionError"
    assert error["field"] == "B"


def test_invalid_configuration_exits_early(tmp_path):
    assert main(["check", "--problem", LCS, "--out", str(tmp_path / "out")]) == 1
    assert not (tmp_path / "out").exists()
    assert main(["solve", "--problem", LCS, "--nodes", "1", "--out", str(tmp_path / "out")]) == 1


def test_unreadable_problem_path_exits_with_error(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--problem", str(tmp_path), "--out", str(out)]) == 1
    error = read_report(out)["error"]
    assert error["stage"] == "load"
    assert error["type"] == "ProblemFileError"


@pytest.mark.slow
def test_counterexample_pipeline_reproduces_divergence(tmp_path):
    out = tmp_path / "pipe"
    start = time.perf_counter()
    code = main(["pipeline", "--problem", "builtin:counterexample", "--nodes", "100", "--out", str(out)])
    elapsed = time.perf_counter() - start
    assert code == 0
    report = read_report(out)
    assert report["solve"]["status"] == "converged"
    assert report["divergence"]["fraction"] >= 0.9
    assert report["aggregate"]["label_lambda"] == "W"
    assert report["aggregate"]["label_eta"] == "M"
    interior = report["per_node"][1:]
    assert all(node["label_lambda"] != "C" and node["label_eta"] == "M" for node in interior)
    frame = pd.read_csv(out / "trajectory.csv")
    assert np.max(np.abs(frame["x1"])) <= 1e-6
    assert np.max(np.abs(frame["u1"])) <= 1e-4
    assert elapsed < 5.0
