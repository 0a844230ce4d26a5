"""Sign-constrained quadratic programs module.

Solves

    min  ½ xᵀQx + cᵀx   subject to   Ax = b,   x_i ∈ S_i

where each S_i is one of ℝ, [0, ∞), (-∞, 0] or {0} (the sign codes below).
The working set holds the sign-constrained variables currently fixed at zero;
each iteration solves the equality-constrained subproblem on the free
variables through a regularised (quasi-definite) sparse KKT system, then adds
the most violated variable or releases the one with the most negative bound
multiplier.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

log = logging.getLogger(__name__)

FREE = 0
NONNEG = 1
NONPOS = -1
ZERO = 2


@dataclass(frozen=True)
class QpResult:
    """Solution of a sign-constrained QP."""

    x: np.ndarray
    multipliers: np.ndarray
    objective: float
    fixed: np.ndarray
    iterations: int
    status: str

    @property
    def optimal(self) -> bool:
        """Return True when the active-set loop terminated at a KKT point."""
        return self.status == "optimal"


def sign_violation(x, signs) -> np.ndarray:
    """Return the violation of each sign code.

    Example:
        >>> sign_violation(np.array([-1.0, 2.0, 3.0, 0.5]), np.array([1, -1, 0, 2]))
        array([1. , 2. , 0. , 0.5])
    """
    x = np.asarray(x, dtype=float)
    return np.select(
        [signs == NONNEG, signs == NONPOS, signs == ZERO],
        [np.maximum(-x, 0.0), np.maximum(x, 0.0), np.abs(x)],
        0.0,
    )


def _solve_kkt(Q, c, A, b, free, regularization):
    n = Q.shape[0]
    idx = np.flatnonzero(free)
    k = A.shape[0]
    x = np.zeros(n)
    if idx.size == 0 and k == 0:
        return x, np.zeros(0)
    Qf = Q[idx][:, idx]
    Af = A[:, idx]
    zero = sp.csc_matrix((k, k))
    K0 = sp.bmat([[Qf, Af.T], [Af, zero]], format="csc")
    K = K0 + sp.block_diag(
        [regularization * sp.identity(idx.size), -regularization * sp.identity(k)],
        format="csc",
    )
    rhs = np.concatenate([-c[idx], b])
    sol = np.atleast_1d(spsolve(K, rhs))
    # iterative refinement towards the unregularised system
    for _ in range(2):
        sol = sol + np.atleast_1d(spsolve(K, rhs - K0 @ sol))
    x[idx] = sol[: idx.size]
    return x, sol[idx.size :]


def solve_qp(Q, c, A=None, b=None, signs=None, fixed=None, max_iter=None, regularization=1e-12, tol=1e-11):
    """Solve a convex QP with equality and sign constraints.

    `fixed` warm-starts the working set. Q must be positive definite on
    the free variables (add a small multiple of the identity otherwise).

    Example:
        >>> res = solve_qp(np.eye(2), np.array([1.0, -1.0]), signs=np.array([1, 1]))
        >>> res.status, np.round(res.x, 12).tolist()
        ('optimal', [0.0, 1.0])
        >>> res = solve_qp(np.eye(2), np.zeros(2), np.array([[1.0, 1.0]]), np.array([2.0]))
        >>> np.round(res.x, 9).tolist()
        [1.0, 1.0]
    """
    Q = sp.csc_matrix(Q)
    n = Q.shape[0]
    c = np.asarray(c, dtype=float)
    A = sp.csr_matrix((0, n)) if A is None else sp.csr_matrix(A)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float)
    signs = np.zeros(n, dtype=int) if signs is None else np.asarray(signs, dtype=int)
    always = signs == ZERO
    working = always.copy() if fixed is None else (np.asarray(fixed, dtype=bool) | always)
    working &= signs != FREE
    max_iter = max_iter or 2 * n + 20
    dual_tol = tol * (1.0 + np.abs(c).max(initial=0.0))
    seen = set()

    status = "max_iter"
    x, y = np.zeros(n), np.zeros(A.shape[0])
    iteration = 0
    for iteration in range(1, max_iter + 1):
        key = working.tobytes()
        if key in seen:
            status = "cycling"
            break
        seen.add(key)

        x, y = _solve_kkt(Q, c, A, b, ~working, regularization)
        violation = sign_violation(x, signs)
        violation[working] = 0.0
        worst = int(np.argmax(violation)) if n else 0
        if n and violation[worst] > tol:
            working[worst] = True
            continue

        gradient = Q @ x + c + A.T @ y
        dual = np.where(working & ~always, signs * gradient, np.inf)
        weakest = int(np.argmin(dual)) if n else 0
        if n and dual[weakest] < -dual_tol:
            working[weakest] = False
            continue
        status = "optimal"
        break

    if status != "optimal":
        log.debug("active-set QP stopped with status %s after %d iterations", status, iteration)
        x = np.where(sign_violation(x, signs) > 0.0, 0.0, x)
    objective = float(0.5 * x @ (Q @ x) + c @ x)
    return QpResult(x, y, objective, working, iteration, status)
