"""Constraint qualification tests."""

import numpy as np
import pytest
from scipy.linalg import null_space

from ocpecx.models.cq import (
    abnormal_witness,
    audit,
    audit_node,
    bounded_slope,
    full_row_rank,
    kappa_estimate,
    linear_condition,
    mpec_licq,
    no_abnormal_multiplier,
)
from ocpecx.models.lcp import simulate_lcs
from ocpecx.models.problem import counterexample, linear_lcs
from ocpecx.models.qp import FREE, ZERO
from ocpecx.tests.conftest import zero_trajectory


def test_counterexample_fails_every_qualification(cex):
    problem, traj = cex
    assert mpec_licq(problem, traj, 5)[0] == "fails"
    check = no_abnormal_multiplier(problem, traj, 5)
    assert check.verdict == "inconclusive"
    np.testing.assert_allclose(np.abs(check.witness), [0.0, 1.0], atol=1e-9)
    assert check.branch == ("G0",)
    assert check.wbcq_violated
    kappa, patterns = kappa_estimate(problem, traj, 5)
    assert np.isinf(kappa) and patterns == 2
    assert not linear_condition(problem)
    verdict = audit_node(problem, traj, 5)
    assert not verdict.error_bound_certified
    assert verdict.to_dict()["kappa_scope"] == "face-exact"


def test_nondegenerate_linear_node(lcs):
    problem, traj = lcs
    licq, sigma = mpec_licq(problem, traj, 10)
    assert licq == "holds" and sigma == pytest.approx(1.0)
    assert no_abnormal_multiplier(problem, traj, 10).verdict == "holds_via_no_multiplier"
    assert kappa_estimate(problem, traj, 10) == (pytest.approx(1.0), 1)
    slope = bounded_slope(problem, traj, 10, 1.0)
    assert slope["method"] == "operator_norm"
    assert slope["k_S"] == pytest.approx(1.0)
    assert np.isinf(slope["radius_ratio"])


def test_kappa_on_biactive_control():
    problem = linear_lcs(B=((0.0,),), c=(0.0,), D=((2.0,),), x0=(-1.0,))
    traj = simulate_lcs(problem, 10)
    np.testing.assert_allclose(traj.u[:, 0], 0.5)
    assert mpec_licq(problem, traj, 3) == ("holds", pytest.approx(2.0))
    kappa, _ = kappa_estimate(problem, traj, 3)
    assert kappa == pytest.approx(0.5)


def test_degenerate_linear_node():
    problem = linear_lcs(c=(0.0,), x0=(0.0,))
    traj = zero_trajectory(problem, 10)
    verdict = audit_node(problem, traj, 4)
    assert verdict.licq == "fails"
    assert verdict.quasi_normality == "holds_via_no_multiplier"
    assert verdict.witness is None
    assert verdict.kappa == pytest.approx(1.0)
    assert verdict.patterns == 2
    assert verdict.linear_condition and verdict.error_bound_certified


def test_bounded_slope_samples_nonlinear_problems(cex):
    problem, traj = cex
    slope = bounded_slope(problem, traj, 0, 2.0, seed=4)
    assert slope["method"] == "tube_sampling"
    assert slope["lipschitz"]["H"] == pytest.approx(1.0)
    assert slope["k_S"] == pytest.approx(2.0)


def test_audit_covers_requested_nodes(lcs):
    problem, traj = lcs
    verdicts = audit(problem, traj, nodes=[0, 7])
    assert [v.node for v in verdicts] == [0, 7]
    assert len(audit(problem, traj)) == traj.N


@pytest.mark.parametrize("k, m", [(1, 3), (2, 3), (3, 3), (2, 5)])
def test_full_row_rank_matches_gram_determinant(k, m):
    rng = np.random.default_rng(k * 10 + m)
    for trial in range(50):
        rows = rng.standard_normal((k, m))
        if trial % 2 and k > 1:
            rows[-1] = rows[0] * rng.standard_normal()
        expected = np.linalg.det(rows @ rows.T) > 1e-12
        assert full_row_rank(rows)[0] == expected


def test_full_row_rank_counts_rows():
    assert full_row_rank(np.ones((3, 2))) == (False, 0.0)
    assert full_row_rank(np.zeros((0, 2))) == (True, float("inf"))


def test_abnormal_witness_matches_null_space():
    rng = np.random.default_rng(12)
    pairs = [(0, 2), (1, 3)]
    for trial in range(60):
        psi_u = rng.standard_normal((3, 4))
        if trial % 2:
            w = rng.uniform(0.1, 1.0, 4)
            psi_u[:, 3] = -(psi_u[:, :3] @ w[:3]) / w[3]
        # every face but the all-nonnegative branch leaves at most three generic columns
        kernel = null_space(psi_u)[:, 0]
        expected = bool(np.all(kernel > 0.0) or np.all(kernel < 0.0))
        witness, branch = abnormal_witness(psi_u, [FREE] * 4, pairs, [ZERO] * 3)
        assert (witness is not None) == expected
        if expected:
            assert branch == ("S", "S")
            assert np.all(witness >= -1e-9) and np.max(witness) > 1e-9
            np.testing.assert_allclose(psi_u @ witness, 0.0, atol=1e-8)


def test_box_normals_absorb_gradients():
    witness, _ = abnormal_witness(np.array([[1.0]]), [FREE], [], [FREE])
    assert witness is not None
    assert abnormal_witness(np.array([[1.0]]), [FREE], [], [ZERO]) == (None, None)


def test_counterexample_licq_rows_outnumber_controls():
    problem = counterexample()
    traj = zero_trajectory(problem, 4)
    assert mpec_licq(problem, traj, 0) == ("fails", 0.0)
