"""Stationarity tests."""

import itertools

import numpy as np
import pytest
from scipy.optimize import lsq_linear

from ocpecx.models.errors import ConfigError, InfeasiblePointError
from ocpecx.models.lcp import simulate_lcs
from ocpecx.models.node import node_data
from ocpecx.models.problem import counterexample, linear_lcs
from ocpecx.models.qp import FREE, ZERO
from ocpecx.models.stationarity import (
    AdjointArc,
    branch_least_squares,
    check_feasible,
    classical_fj_crosscheck,
    classify,
    default_lambda0,
    hamiltonian_multiplier_set,
    hamiltonian_multipliers,
    recover_adjoint,
    weierstrass_check,
)
from ocpecx.models.trajectory import DiscreteTrajectory
from ocpecx.models.transcription import HomotopySchedule, discretize, residuals, solve_homotopy
from ocpecx.tests.conftest import zero_trajectory


def analyse(problem, traj, lambda0=1):
    adj, lam = recover_adjoint(problem, traj, lambda0)
    eta, solutions = hamiltonian_multiplier_set(problem, traj, adj)
    sets = [nd.index_sets for nd in node_data(problem, traj, 1e-6)]
    return adj, lam, eta, solutions, classify(lam, eta, sets, 1e-6)


def test_counterexample_adjoint(cex):
    problem, traj = cex
    adj, lam = recover_adjoint(problem, traj)
    t = traj.t
    np.testing.assert_allclose(adj.p[:, 0], -t, atol=1e-6)
    np.testing.assert_allclose(lam.lam_G[:, 0], -t[:-1], atol=1e-6)
    np.testing.assert_allclose(lam.lam_H[:, 0], 1.0, atol=1e-6)
    assert lam.residual.max() <= 1e-8
    assert adj.lambda0 == 1.0 and adj.nontrivial


def test_counterexample_labels_and_divergence(cex):
    problem, traj = cex
    _, _, eta, solutions, report = analyse(problem, traj)
    assert report.labels_lambda[0] == "S"
    assert set(report.labels_lambda[1:]) == {"W"}
    assert report.labels_eta[0] == "S"
    assert set(report.labels_eta[1:]) == {"M"}
    np.testing.assert_allclose(eta.lam_G[:, 0], -traj.t[:-1], atol=1e-6)
    np.testing.assert_allclose(eta.lam_H[:, 0], 0.0, atol=1e-6)
    assert all(s.branch == ("H0",) for s in solutions[1:])
    assert report.divergence_fraction == 1.0
    assert report.aggregate_lambda == "W"
    assert report.aggregate_eta == "M"
    summary = report.to_dict()
    assert summary["divergence"]["measure"] == "node_fraction"
    assert len(report.per_node()) == traj.N


def test_counterexample_weierstrass(cex):
    problem, traj = cex
    adj, _ = recover_adjoint(problem, traj)
    result = weierstrass_check(problem, traj, adj, samples=50, seed=3)
    assert result.ok
    assert result.unsampled == []
    assert result.radius == 10.0
    assert result.to_dict()["ball"] == "open"


def test_counterexample_abnormal_normalization(cex):
    problem, traj = cex
    assert default_lambda0(problem) == [1]
    adj, lam = recover_adjoint(problem, traj, lambda0=0)
    assert adj.lambda0 == 0.0
    assert adj.normalization == "p0[0]=+1"
    assert adj.p[0, 0] == pytest.approx(1.0)
    assert adj.nontrivial


def test_simulated_linear_system_is_strongly_stationary(lcs):
    problem, traj = lcs
    adj, lam, eta, _, report = analyse(problem, traj)
    np.testing.assert_allclose(adj.p, 0.0, atol=1e-8)
    assert set(report.labels_lambda) == {"S"} and set(report.labels_eta) == {"S"}
    assert report.divergence_nodes == ()
    assert report.aggregate_lambda == report.aggregate_eta == "S"
    ok, residual, _ = classical_fj_crosscheck(problem, traj, adj, lam, 10)
    assert ok and residual <= 1e-8


def test_crosscheck_rescales_with_gamma():
    problem = linear_lcs(T=(0.5,))
    traj = simulate_lcs(problem, 50)
    adj, lam = recover_adjoint(problem, traj)
    np.testing.assert_allclose(adj.p[:, 0], 0.5, atol=1e-6)
    np.testing.assert_allclose(lam.lam_G[:, 0], -0.5, atol=1e-6)
    for k in (0, 20, 49):
        ok, _, (alpha, beta, gamma) = classical_fj_crosscheck(problem, traj, adj, lam, k)
        assert ok
        assert gamma == pytest.approx(0.5 / traj.x[k, 0], rel=1e-5)
        np.testing.assert_allclose(alpha, 0.0, atol=1e-6)
        np.testing.assert_allclose(beta, 0.0, atol=1e-6)
    eta = hamiltonian_multipliers(problem, traj, adj, 20)
    np.testing.assert_allclose(eta.eta, [-0.5, 0.0], atol=1e-6)
    assert eta.level == "M"


def test_weierstrass_finds_improving_control():
    problem = linear_lcs(A=((0.0,),), B=((1.0,),), c=(0.0,), C=((1.0,),), D=((0.0,),), q=(0.0,), x0=(0.0,))
    traj = zero_trajectory(problem, 10)
    adj = AdjointArc(traj.t, np.ones((11, 1)), 1.0, np.zeros(1), np.zeros(1))
    result = weierstrass_check(problem, traj, adj, samples=40, seed=1)
    assert not result.ok
    assert {v["node"] for v in result.violations} == set(range(10))
    assert all(v["gain"] > 0.0 and v["u"][0] > 0.0 for v in result.violations)


def test_weierstrass_uses_the_problem_radius():
    problem = linear_lcs(A=((0.0,),), B=((1.0,),), c=(0.0,), C=((1.0,),), D=((0.0,),), q=(0.0,), x0=(0.0,), radius=0.5)
    traj = zero_trajectory(problem, 4)
    adj = AdjointArc(traj.t, np.ones((5, 1)), 1.0, np.zeros(1), np.zeros(1))
    result = weierstrass_check(problem, traj, adj, samples=40, seed=1)
    assert result.radius == 0.5
    assert all(0.0 < v["u"][0] < 0.5 for v in result.violations)


def test_recover_rejects_bad_input(cex):
    problem, traj = cex
    with pytest.raises(ConfigError):
        recover_adjoint(problem, traj, lambda0=2)
    shifted = DiscreteTrajectory(traj.t, traj.x + 1.0, traj.u)
    with pytest.raises(InfeasiblePointError) as info:
        recover_adjoint(problem, shifted)
    assert info.value.max_residual >= 1.0


def test_branch_least_squares_matches_enumeration():
    rng = np.random.default_rng(9)
    pairs = [(0, 2), (1, 3)]
    faces = {"G0": (False, True), "H0": (True, False), "S": (True, True)}
    for _ in range(40):
        psi_u = rng.standard_normal((5, 4))
        b = rng.standard_normal(5)
        sol = branch_least_squares(psi_u, b, [FREE] * 4, pairs, [ZERO] * 5, np.inf)
        best = np.inf
        for branch in itertools.product(faces, repeat=2):
            keep = np.zeros(4, dtype=bool)
            for (iG, iH), name in zip(pairs, branch):
                keep[iG], keep[iH] = faces[name]
            lower = np.array([0.0 if branch[j % 2] == "S" else -np.inf for j in range(4)])[keep]
            res = lsq_linear(psi_u[:, keep], b, bounds=(lower, np.inf), method="bvls", tol=1e-12)
            best = min(best, float(np.linalg.norm(res.fun)))
        assert sol.level == "M"
        assert sol.residual == pytest.approx(best, abs=1e-6)


def test_branch_least_squares_falls_back_to_weaker_levels():
    psi_u = np.array([[1.0, 1.0]])
    sol = branch_least_squares(psi_u, np.array([-1.0]), [FREE, FREE], [(0, 1)], [ZERO], 1e-8)
    assert sol.level == "M"
    np.testing.assert_allclose(psi_u @ sol.x[:2], [-1.0], atol=1e-8)
    stuck = branch_least_squares(np.zeros((1, 2)), np.array([1.0]), [FREE, FREE], [(0, 1)], [ZERO], 1e-8)
    assert stuck.level == "fail"
    assert stuck.residual == pytest.approx(1.0)


def positive_pair_trajectory(value, N=10):
    problem = linear_lcs(A=((0.0,),), B=((0.0,),), c=(0.0,), C=((1.0,),), D=((1.0,),), q=(0.0,), x0=(0.0,))
    traj = zero_trajectory(problem, N)
    return problem, DiscreteTrajectory(traj.t, traj.x, np.full_like(traj.u, value))


def test_pairs_off_the_complementarity_set_are_infeasible():
    problem, traj = positive_pair_trajectory(1e-4)
    assert residuals(discretize(problem, traj.N), traj).complementarity == pytest.approx(1e-4)
    with pytest.raises(InfeasiblePointError) as info:
        check_feasible(problem, traj)
    assert info.value.max_residual == pytest.approx(1e-4)
    with pytest.raises(InfeasiblePointError):
        recover_adjoint(problem, traj, tol_act=1e-8)


def test_pairs_within_feasibility_tolerance_are_classified():
    problem, traj = positive_pair_trajectory(5e-7)
    check_feasible(problem, traj)
    assert all(nd.index_sets.i_0plus == (0,) for nd in node_data(problem, traj, 1e-8))
    adj, lam = recover_adjoint(problem, traj, tol_act=1e-8)
    np.testing.assert_allclose(adj.p, 0.0, atol=1e-8)
    assert lam.residual.max() <= 1e-6


@pytest.mark.slow
def test_solved_linear_system_satisfies_adjoint_equations():
    problem = linear_lcs(T=(0.5,))
    traj, info = solve_homotopy(discretize(problem, 50), HomotopySchedule())
    assert info.status == "converged"
    adj, lam = recover_adjoint(problem, traj)
    assert lam.residual.max() <= 1e-6
    np.testing.assert_allclose(adj.p[:, 0], 0.5, atol=1e-3)
    # A = 0, B = C = D = 1
    np.testing.assert_allclose(adj.derivative()[:, 0], -lam.lam_H[:, 0], atol=1e-6)
    np.testing.assert_allclose(adj.p[:-1, 0] + lam.lam_G[:, 0] + lam.lam_H[:, 0], 0.0, atol=1e-6)


def test_divergence_fraction_grows_with_refinement():
    problem = counterexample()
    fractions = []
    for N in (25, 50, 100, 200):
        fractions.append(analyse(problem, zero_trajectory(problem, N))[-1].divergence_fraction)
    assert fractions[0] > 0.0
    assert all(later >= earlier for earlier, later in zip(fractions, fractions[1:]))
    assert fractions[-1] >= 0.9


@pytest.mark.parametrize("gamma", [2.0, 0.25])
def test_recovery_scales_with_the_cost(gamma):
    base = linear_lcs(T=(0.5,))
    scaled = linear_lcs(T=(0.5,), weights=(gamma,))
    traj = simulate_lcs(base, 50)
    adj, lam, _, _, report = analyse(base, traj)
    adj_s, lam_s, _, _, report_s = analyse(scaled, traj)
    np.testing.assert_allclose(adj_s.p, gamma * adj.p, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(lam_s.lam_G, gamma * lam.lam_G, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(lam_s.lam_H, gamma * lam.lam_H, rtol=1e-6, atol=1e-8)
    assert report_s.labels_lambda == report.labels_lambda
    assert report_s.labels_eta == report.labels_eta


def test_crosscheck_at_biactive_node():
    problem = linear_lcs(c=(0.0,), x0=(0.0,), T=(-0.5,))
    traj = zero_trajectory(problem, 10)
    adj, lam = recover_adjoint(problem, traj)
    k = 4
    assert node_data(problem, traj, 1e-6, nodes=[k])[0].index_sets.i_00 == (0,)
    assert lam.lam_G[k, 0] >= -1e-8 and lam.lam_H[k, 0] >= -1e-8
    ok, residual, (alpha, beta, gamma) = classical_fj_crosscheck(problem, traj, adj, lam, k)
    assert ok and residual <= 1e-8
    assert gamma == 0.0
    assert alpha[0] + beta[0] == pytest.approx(0.5, abs=1e-6)
