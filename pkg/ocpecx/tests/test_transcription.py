"""Transcription and homotopy tests."""

import time

import numpy as np
import pytest

from ocpecx.models.errors import ConfigError
from ocpecx.models.lcp import simulate_lcs
from ocpecx.models.problem import counterexample, linear_lcs
from ocpecx.models.transcription import (
    AugmentedLagrangian,
    FiniteMpec,
    HomotopySchedule,
    StageRecord,
    discretize,
    initial_guess,
    polish,
    residuals,
    solve_homotopy,
)


def numeric_jacobian(fun, z, step=1e-7):
    base = fun(z)
    jac = np.zeros((base.size, z.size))
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = step
        jac[:, j] = (fun(z + e) - fun(z - e)) / (2 * step)
    return jac


@pytest.fixture(name="planar")
def fixture_planar():
    return linear_lcs(
        A=[[0.0, 1.0], [-1.0, 0.0]],
        B=[[0.0], [1.0]],
        c=[0.0, 0.1],
        C=[[1.0, 0.5]],
        D=[[2.0]],
        q=[0.3],
        x0=[1.0, 0.0],
        T=[0.5, 0.0],
    )


@pytest.mark.parametrize("which", ["counterexample", "planar"])
def test_jacobians_match_finite_differences(which, planar):
    problem = counterexample() if which == "counterexample" else planar
    fm = FiniteMpec(problem, 5)
    z = np.random.default_rng(2).standard_normal(fm.size)
    _, grad = fm.objective(z)
    np.testing.assert_allclose(grad, numeric_jacobian(lambda w: np.array([fm.objective(w)[0]]), z)[0], atol=1e-6)
    _, Je = fm.equalities(z)
    np.testing.assert_allclose(Je.toarray(), numeric_jacobian(lambda w: fm.equalities(w)[0], z), atol=1e-6)
    _, Ji = fm.inequalities(z, 0.1)
    np.testing.assert_allclose(Ji.toarray(), numeric_jacobian(lambda w: fm.inequalities(w, 0.1)[0], z), atol=1e-6)


def test_layout_and_bounds(planar):
    fm = discretize(planar, 4)
    assert fm.size == 5 * 2 + 4 * 1
    assert fm.h == pytest.approx(0.25)
    np.testing.assert_array_equal(fm.lower[:2], [1.0, 0.0])
    np.testing.assert_array_equal(fm.upper[:2], [1.0, 0.0])
    assert np.all(np.isinf(fm.lower[2:]))
    x, u = fm.split(np.arange(fm.size, dtype=float))
    assert x.shape == (5, 2) and u.shape == (4, 1)
    np.testing.assert_array_equal(fm.join(x, u), np.arange(fm.size))


def test_transcription_needs_two_intervals():
    with pytest.raises(ConfigError):
        FiniteMpec(counterexample(), 1)


def test_schedule():
    sched = HomotopySchedule()
    np.testing.assert_allclose(sched.taus, [10.0**-k for k in range(1, 9)])
    np.testing.assert_allclose(HomotopySchedule(tau0=1.0, tau_min=0.01).taus, [1.0, 0.1, 0.01])
    assert sched.stage_tolerance(1e-1) == pytest.approx(1e-3)
    assert sched.stage_tolerance(1e-8) == 1e-8
    with pytest.raises(ConfigError):
        HomotopySchedule(factor=1.5)
    with pytest.raises(ConfigError):
        HomotopySchedule(tau_min=1.0, tau0=0.1)


def test_residuals_of_simulation_are_zero(lcs):
    problem, traj = lcs
    report = residuals(discretize(problem, traj.N), traj)
    assert report.max <= 1e-12
    assert set(report.to_dict()) >= {"dynamics", "equality", "inequality", "G", "H", "complementarity", "bounds", "max"}


def test_initial_guess_uses_simulation(lcs):
    problem, traj = lcs
    fm = discretize(problem, traj.N)
    np.testing.assert_allclose(initial_guess(fm), fm.point(traj))
    assert np.all(initial_guess(FiniteMpec(counterexample(), 10)) == 0.0)


def test_polish_snaps_to_active_pieces():
    fm = FiniteMpec(counterexample(), 10)
    z = 1e-5 * np.random.default_rng(4).standard_normal(fm.size)
    point, accepted = polish(fm, z, HomotopySchedule())
    assert accepted
    assert residuals(fm, point).max <= 1e-12


def test_polish_rejects_far_moves():
    fm = FiniteMpec(counterexample(), 10)
    z = np.full(fm.size, -0.5)
    point, accepted = polish(fm, z, HomotopySchedule(polish_radius=1e-3))
    assert not accepted
    np.testing.assert_array_equal(point, z)


def test_counterexample_solve():
    fm = FiniteMpec(counterexample(), 20)
    traj, info = solve_homotopy(fm, HomotopySchedule())
    assert np.max(np.abs(traj.x)) <= 1e-6
    assert np.max(np.abs(traj.u)) <= 1e-4
    assert info.status == "converged"
    assert len(info.stages) == 8
    assert info.returned_stage == 7


def test_linear_solve_matches_simulation(lcs):
    problem, sim = lcs
    traj, info = solve_homotopy(discretize(problem, sim.N), HomotopySchedule())
    assert np.max(np.abs(traj.x - sim.x)) <= 1e-4
    assert np.max(np.abs(traj.u - sim.u)) <= 1e-4
    assert info.residuals.max <= 1e-6


@pytest.mark.parametrize("problem", [counterexample(), linear_lcs()])
def test_accepted_complementarity_is_monotone(problem):
    _, info = solve_homotopy(FiniteMpec(problem, 10), HomotopySchedule(polish=False))
    accepted = [stage.complementarity for stage in info.stages if stage.accepted]
    assert all(later <= earlier for earlier, later in zip(accepted, accepted[1:]))
    for stage in info.stages:
        assert stage.accepted == (stage.complementarity <= stage.tau + 1e-9)


@pytest.mark.parametrize("which", ["counterexample", "planar"])
def test_lagrangian_gradient_matches_assembled_jacobians(which, planar):
    problem = counterexample() if which == "counterexample" else planar
    fm = FiniteMpec(problem, 6)
    rng = np.random.default_rng(8)
    z = rng.standard_normal(fm.size)
    f, ce, ci = fm.values(z, 0.1)
    _, grad = fm.objective(z)
    values, Je = fm.equalities(z)
    inequalities, Ji = fm.inequalities(z, 0.1)
    assert f == pytest.approx(fm.objective(z)[0])
    np.testing.assert_allclose(ce, values)
    np.testing.assert_allclose(ci, inequalities)
    y, w = rng.standard_normal(ce.size), rng.uniform(0.0, 2.0, ci.size)
    np.testing.assert_allclose(fm.lagrangian_gradient(z, y, w), grad + Je.T @ y + Ji.T @ w, atol=1e-12)


def test_node_jacobian_reuses_its_pattern(planar):
    fm = FiniteMpec(planar, 5)
    rng = np.random.default_rng(3)
    first, second = rng.standard_normal(fm.size), rng.standard_normal(fm.size)
    jac = [fm.node_jacobian(fm.evaluate(z)["dynamics"]) for z in (first, second)]
    assert list(fm._patterns) == [2]
    np.testing.assert_array_equal(jac[0].indices, jac[1].indices)
    expected = numeric_jacobian(lambda w: fm.evaluate(w)["dynamics"].value.ravel(), second)
    np.testing.assert_allclose(jac[1].toarray(), expected, atol=1e-6)


def test_complementarity_residual_is_distance_to_pairs():
    problem = linear_lcs(A=((0.0,),), B=((0.0,),), c=(0.0,), C=((1.0,),), D=((1.0,),), q=(0.0,), x0=(0.0,))
    fm = FiniteMpec(problem, 10)
    z = np.zeros(fm.size)
    z[fm.nx :] = 1e-4
    report = residuals(fm, z)
    assert report.complementarity == pytest.approx(1e-4)
    assert report.max == pytest.approx(1e-4)
    z[fm.nx] = 0.5
    assert residuals(fm, z).complementarity == pytest.approx(0.5)


def test_unaccepted_last_stage_returns_last_accepted_iterate(monkeypatch):
    fm = FiniteMpec(counterexample(), 4)
    outcomes = iter([(np.zeros(fm.size), 0.05), (np.full(fm.size, 0.3), 0.5)])

    def solve_stage(self, z, tau):
        point, compl = next(outcomes)
        return point, StageRecord(tau, compl, 0.0, 0.0, 1, "converged")

    monkeypatch.setattr(AugmentedLagrangian, "solve_stage", solve_stage)
    traj, info = solve_homotopy(fm, HomotopySchedule(tau0=0.1, tau_min=0.01, polish=False))
    assert [stage.accepted for stage in info.stages] == [True, False]
    assert info.returned_stage == 0
    assert info.status == "stalled"
    np.testing.assert_array_equal(traj.u, 0.0)
    assert info.to_dict()["returned_stage"] == 0


@pytest.mark.slow
def test_shifted_target_solve_runs_within_budget():
    problem = linear_lcs(T=(0.5,))
    start = time.perf_counter()
    traj, info = solve_homotopy(discretize(problem, 50), HomotopySchedule())
    elapsed = time.perf_counter() - start
    assert np.max(np.abs(traj.x - simulate_lcs(problem, 50).x)) <= 1e-4
    assert info.residuals.max <= 1e-6
    assert elapsed < 10.0
