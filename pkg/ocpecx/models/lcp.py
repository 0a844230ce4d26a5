"""Linear complementarity module.

Lemke's complementary pivoting on the tableau [I, −M, −e, q] with the
all-ones covering vector e, and explicit-Euler simulation of linear
complementarity systems ẋ = Ax + Bu + c, 0 ≤ u ⊥ Cx + Du + q ≥ 0.
"""

import logging
from dataclasses import dataclass

import numpy as np

from ocpecx.models.errors import DimensionError, LcpError, UnsupportedProblemError
from ocpecx.models.problem import OcpecProblem
from ocpecx.models.trajectory import DiscreteTrajectory

log = logging.getLogger(__name__)

SOLVED = "solved"
RAY_TERMINATION = "ray_termination"
CYCLE_LIMIT = "cycle_limit"


@dataclass(frozen=True, eq=False)
class LcpInstance:
    """Find z ≥ 0 with w = Mz + q ≥ 0 and zᵀw = 0."""

    M: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        M = np.atleast_2d(np.asarray(self.M, dtype=float))
        q = np.asarray(self.q, dtype=float).reshape(-1)
        if M.shape != (q.shape[0], q.shape[0]):
            raise DimensionError("M", (q.shape[0], q.shape[0]), M.shape)
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(q))):
            raise ValueError("LCP data must be finite")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "q", q)

    @property
    def tolerance(self) -> float:
        """Return the solution tolerance, 1e-10 scaled by the data magnitude."""
        return 1e-10 * (1.0 + max(np.abs(self.M).max(initial=0.0), np.abs(self.q).max(initial=0.0)))


@dataclass(frozen=True, eq=False)
class LcpSolution:
    """Lemke output."""

    z: np.ndarray
    w: np.ndarray
    status: str
    pivots: int

    @property
    def solved(self) -> bool:
        """Return True for a certified solution."""
        return self.status == SOLVED


def complementarity_residual(inst: LcpInstance, z) -> float:
    """Return max(‖min(z, 0)‖∞, ‖min(w, 0)‖∞, |zᵀw|) with w = Mz + q."""
    w = inst.M @ z + inst.q
    return float(max(np.max(-z, initial=0.0), np.max(-w, initial=0.0), abs(z @ w)))


def _pivot(tableau, row, column):
    tableau[row] /= tableau[row, column]
    others = np.arange(tableau.shape[0]) != row
    tableau[others] -= np.outer(tableau[others, column], tableau[row])


def lemke(inst: LcpInstance, max_pivots=1000, pivot_tol=1e-12) -> LcpSolution:
    """Solve an LCP by complementary pivoting.

    Ties in the ratio test go to the artificial variable, then to the first
    row; after 3·l degenerate pivots the least-index rule takes over.

    Example:
        >>> sol = lemke(LcpInstance(np.array([[1.0]]), np.array([-1.0])))
        >>> sol.status, sol.z.tolist(), sol.w.tolist()
        ('solved', [1.0], [0.0])
        >>> sol = lemke(LcpInstance(np.array([[2.0, 1.0], [1.0, 2.0]]), np.array([-1.0, -1.0])))
        >>> np.round(sol.z, 12).tolist()
        [0.333333333333, 0.333333333333]
    """
    M, q = inst.M, inst.q
    l = q.shape[0]  # noqa: E741
    if np.all(q >= 0.0):
        return LcpSolution(np.zeros(l), q.copy(), SOLVED, 0)

    artificial = 2 * l
    tableau = np.hstack([np.eye(l), -M, -np.ones((l, 1)), q[:, None]])
    basis = np.arange(l)
    row, entering = int(np.argmin(q)), artificial
    pivots, degenerate = 0, 0
    status = CYCLE_LIMIT
    while pivots < max_pivots:
        _pivot(tableau, row, entering)
        leaving, basis[row] = basis[row], entering
        pivots += 1
        if leaving == artificial:
            status = SOLVED
            break
        entering = leaving + l if leaving < l else leaving - l
        column = tableau[:, entering]
        rows = np.flatnonzero(column > pivot_tol)
        if rows.size == 0:
            status = RAY_TERMINATION
            break
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + pivot_tol * (1.0 + abs(best))]
        if best <= pivot_tol:
            degenerate += 1
        if np.any(basis[ties] == artificial):
            row = int(ties[basis[ties] == artificial][0])
        elif degenerate > 3 * l:
            row = int(ties[np.argmin(basis[ties])])
        else:
            row = int(ties[0])

    values = np.zeros(2 * l + 1)
    values[basis] = tableau[:, -1]
    z = np.where(np.abs(values[l : 2 * l]) <= pivot_tol, 0.0, values[l : 2 * l])
    z = np.maximum(z, 0.0) if status == SOLVED else z
    w = M @ z + q
    if status != SOLVED:
        log.debug("lemke stopped with status %s after %d pivots", status, pivots)
    return LcpSolution(z, w, status, pivots)


def simulate_lcs(problem: OcpecProblem, N, max_pivots=1000) -> DiscreteTrajectory:
    """Integrate a linear complementarity system by explicit Euler.

    x_{k+1} = x_k + h(Ax_k + Bu_k + c) where u_k solves LCP(D, Cx_k + q).

    Example:
        >>> from ocpecx.models.problem import linear_lcs
        >>> traj = simulate_lcs(linear_lcs(), 10)
        >>> np.round(traj.x[:3, 0], 12).tolist(), traj.u[:3, 0].tolist()
        ([1.0, 0.9, 0.8], [0.0, 0.0, 0.0])
    """
    if problem.linear is None:
        raise UnsupportedProblemError(f"{problem.name} is not a linear complementarity system")
    if N < 2:
        raise ValueError("N must be at least 2")
    d = problem.linear
    t = DiscreteTrajectory.grid(problem.t0, problem.t1, N)
    h = (problem.t1 - problem.t0) / N
    x = np.zeros((N + 1, problem.n))
    u = np.zeros((N, problem.m))
    x[0] = problem.endpoint.initial.anchor()
    for k in range(N):
        sol = lemke(LcpInstance(d.D, d.C @ x[k] + d.q), max_pivots)
        if not sol.solved:
            raise LcpError(k, sol.status)
        u[k] = sol.z
        x[k + 1] = x[k] + h * (d.A @ x[k] + d.B @ u[k] + d.c)
    log.info("simulated %s on %d intervals", problem.name, N)
    return DiscreteTrajectory(t, x, u)
