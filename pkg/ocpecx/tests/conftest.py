"""Shared fixtures."""

import numpy as np
import pytest

from ocpecx.models.lcp import simulate_lcs
from ocpecx.models.problem import counterexample, linear_lcs
from ocpecx.models.trajectory import DiscreteTrajectory


def zero_trajectory(problem, N):
    """Return x ≡ 0, u ≡ 0 on the grid of N intervals."""
    t = DiscreteTrajectory.grid(problem.t0, problem.t1, N)
    return DiscreteTrajectory(t, np.zeros((N + 1, problem.n)), np.zeros((N, problem.m)))


@pytest.fixture(name="cex")
def fixture_cex():
    """Counterexample with its unique admissible pair on 100 intervals."""
    problem = counterexample()
    return problem, zero_trajectory(problem, 100)


@pytest.fixture(name="lcs")
def fixture_lcs():
    """Scalar linear complementarity system simulated on 50 intervals."""
    problem = linear_lcs()
    return problem, simulate_lcs(problem, 50)
