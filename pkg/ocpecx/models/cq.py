"""Constraint qualification module.

Node-wise audits of the u-gradient family: MPEC-LICQ by a singular-value
rank test, the no-nonzero-abnormal-multiplier condition by one bounded
linear program per branch, coordinate and sign, the linear condition, and
the bounded-slope constant κ on the subspace patterns of the degenerate
indices.
"""

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import svdvals
from scipy.optimize import linprog

from ocpecx.models.node import NodeData, node_data
from ocpecx.models.problem import OcpecProblem
from ocpecx.models.qp import FREE, NONNEG, NONPOS, ZERO
from ocpecx.models.stationarity import BRANCHES
from ocpecx.models.trajectory import DiscreteTrajectory

log = logging.getLogger(__name__)

WITNESS_TOL = 1e-9
TUBE_RADIUS = 1e-1
TUBE_SAMPLES = 1000

_BOUNDS = {FREE: (-1.0, 1.0), NONNEG: (0.0, 1.0), NONPOS: (-1.0, 0.0), ZERO: (0.0, 0.0)}


def full_row_rank(rows, tol_sv=1e-8):
    """Return (full row rank, smallest row singular value).

    More rows than columns fail by counting with σ = 0.

    Example:
        >>> full_row_rank(np.array([[1.0, 0.0], [0.0, 2.0]]))
        (True, 1.0)
        >>> full_row_rank(np.array([[1.0], [0.0]]))
        (False, 0.0)
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    k, m = rows.shape
    if k == 0:
        return True, float("inf")
    if k > m:
        return False, 0.0
    sigma = float(svdvals(rows).min())
    return sigma > tol_sv, sigma


def licq_rows(nd: NodeData) -> np.ndarray:
    """Return the active u-gradients: free multiplier columns of ∇ᵤΨ and active box rows."""
    codes = nd.multiplier_codes()
    box = np.eye(nd.u.shape[0])[nd.box_codes != ZERO]
    return np.vstack([nd.psi_u[:, codes != ZERO].T, box])


def _licq(nd: NodeData, tol_sv):
    holds, sigma = full_row_rank(licq_rows(nd), tol_sv)
    return ("holds" if holds else "fails"), sigma


def mpec_licq(problem: OcpecProblem, traj: DiscreteTrajectory, node, tol_sv=1e-8, tol_act=1e-6):
    """Return ("holds" | "fails", smallest singular value) of MPEC-LICQ at a node."""
    return _licq(node_data(problem, traj, tol_act, nodes=[node])[0], tol_sv)


def _branch_bounds(codes, pairs, branch):
    signs = np.array(codes, dtype=int)
    for (iG, iH), name in zip(pairs, branch):
        signs[iG], signs[iH] = BRANCHES[name]
    return signs


@lru_cache(maxsize=4096)
def _abnormal_cached(psi_bytes, shape, codes, pairs, box_codes, tol):
    psi_u = np.frombuffer(psi_bytes, dtype=float).reshape(shape)
    m, nv = shape
    A_eq = np.hstack([psi_u, np.eye(m)])
    zeta_bounds = [_BOUNDS[c] for c in box_codes]
    for branch in itertools.product(BRANCHES, repeat=len(pairs)):
        signs = _branch_bounds(codes, pairs, branch)
        bounds = [_BOUNDS[c] for c in signs] + zeta_bounds
        for j in np.flatnonzero(signs != ZERO):
            for sign in (1.0, -1.0):
                lo, hi = bounds[j]
                if (sign > 0 and hi == 0.0) or (sign < 0 and lo == 0.0):
                    continue
                objective = np.zeros(nv + m)
                objective[j] = -sign
                res = linprog(objective, A_eq=A_eq, b_eq=np.zeros(m), bounds=bounds, method="highs")
                if res.status == 0 and -res.fun > tol:
                    return tuple(res.x[:nv]), branch
    return None, None


def abnormal_witness(psi_u, codes, pairs, box_codes, tol=WITNESS_TOL):
    """Return (witness v, branch) of a nonzero abnormal multiplier, or (None, None).

    v satisfies ∇ᵤΨ·v + ζ = 0 with ζ in the box normal cone, the index-set
    sign rules, and one branch (μᵢ = 0, νᵢ = 0, or both ≥ 0) per degenerate
    pair. Each candidate maximises ±v_j over the ∞-norm unit ball.

    Example:
        >>> witness, branch = abnormal_witness(np.array([[1.0, 0.0]]), [0, 0], [(0, 1)], [2])
        >>> (np.round(witness, 9) + 0.0).tolist(), branch
        ([0.0, 1.0], ('G0',))
        >>> abnormal_witness(np.array([[-1.0, -1.0]]), [0, 2], [], [2])
        (None, None)
    """
    psi_u = np.ascontiguousarray(np.atleast_2d(np.asarray(psi_u, dtype=float)))
    witness, branch = _abnormal_cached(
        psi_u.tobytes(),
        psi_u.shape,
        tuple(int(c) for c in codes),
        tuple((int(a), int(b)) for a, b in pairs),
        tuple(int(c) for c in box_codes),
        float(tol),
    )
    return (None, None) if witness is None else (np.array(witness), branch)


@dataclass(frozen=True, eq=False)
class AbnormalCheck:
    """Outcome of the no-nonzero-abnormal-multiplier test."""

    verdict: str
    witness: Optional[np.ndarray] = None
    branch: Optional[Tuple[str, ...]] = None
    wbcq_violated: Optional[bool] = None


def _abnormal(nd: NodeData, tol=WITNESS_TOL) -> AbnormalCheck:
    witness, branch = abnormal_witness(nd.psi_u, nd.multiplier_codes(), nd.degenerate_pairs(), nd.box_codes, tol)
    if witness is None:
        return AbnormalCheck("holds_via_no_multiplier")
    violated = bool(np.max(np.abs(nd.psi_x @ witness), initial=0.0) > tol)
    return AbnormalCheck("inconclusive", witness, branch, violated)


def no_abnormal_multiplier(problem: OcpecProblem, traj: DiscreteTrajectory, node, tol_act=1e-6) -> AbnormalCheck:
    """Return whether every branch at a node admits only the zero abnormal multiplier.

    A witness leaves quasi-normality undecided; `wbcq_violated` tells whether
    it also has ∇ₓΨ·v ≠ 0.
    """
    return _abnormal(node_data(problem, traj, tol_act, nodes=[node])[0])


def linear_condition(problem: OcpecProblem) -> bool:
    """Return True when g, h, G, H are affine and U is a box."""
    return bool(problem.affine)


def _kappa(nd: NodeData, tol_sv, abnormal: Optional[AbnormalCheck] = None):
    abnormal = _abnormal(nd) if abnormal is None else abnormal
    pairs = nd.degenerate_pairs()
    patterns = 2 ** len(pairs)
    if abnormal.verdict != "holds_via_no_multiplier":
        return float("inf"), patterns
    codes = nd.multiplier_codes()
    m = nd.u.shape[0]
    normals = np.eye(m)[:, nd.box_codes != ZERO]
    projector = np.eye(m) - normals @ normals.T
    kappa = 0.0
    for pattern in itertools.product((0, 1), repeat=len(pairs)):
        free = codes != ZERO
        for (iG, iH), side in zip(pairs, pattern):
            free[iH if side else iG] = False
        if not free.any():
            continue
        columns = projector @ nd.psi_u[:, free]
        if columns.shape[1] > m:
            return float("inf"), patterns
        sigma = float(svdvals(columns).min())
        if sigma <= tol_sv:
            return float("inf"), patterns
        kappa = max(kappa, 1.0 / sigma)
    return kappa, patterns


def kappa_estimate(problem: OcpecProblem, traj: DiscreteTrajectory, node, tol_sv=1e-8, tol_act=1e-6):
    """Return (κ, pattern count) with ‖v‖ ≤ κ‖∇ᵤΨ·v + ζ‖ on every subspace pattern.

    Exact on the faces μᵢ = 0 or νᵢ = 0 of each degenerate index and a lower
    bound on the conic branches; +∞ when an abnormal witness exists and 0 when
    every multiplier is forced to zero.
    """
    return _kappa(node_data(problem, traj, tol_act, nodes=[node])[0], tol_sv)


def _lipschitz_linear(problem, nd: NodeData) -> dict:
    return {
        "g": float(np.linalg.norm(nd.g_x, 2)) if nd.g_x.size else 0.0,
        "h": float(np.linalg.norm(nd.h_x, 2)) if nd.h_x.size else 0.0,
        "G": float(np.linalg.norm(nd.G_x, 2)) if nd.G_x.size else 0.0,
        "H": float(np.linalg.norm(nd.H_x, 2)) if nd.H_x.size else 0.0,
    }


def _lipschitz_sampled(problem: OcpecProblem, nd: NodeData, seed, samples=TUBE_SAMPLES, radius=TUBE_RADIUS) -> dict:
    rng = np.random.default_rng(seed)
    X = nd.x + radius * rng.uniform(-1.0, 1.0, (samples, nd.x.shape[0]))
    U = problem.control_set.clip(nd.u + radius * rng.uniform(-1.0, 1.0, (samples, nd.u.shape[0])))
    T = np.full(samples, nd.t)
    out = {}
    for name in ("g", "h", "G", "H"):
        dx = getattr(problem, name)(T, X, U).dx
        out[name] = float(np.linalg.norm(dx, 2, axis=(1, 2)).max(initial=0.0)) if dx.shape[1] else 0.0
    return out


def bounded_slope(problem: OcpecProblem, traj: DiscreteTrajectory, node, kappa, seed=0, tol_act=1e-6) -> dict:
    """Return k_S = κ·(k_x^g + k_x^h + k_x^G + k_x^H) and the ratio R / k_S.

    Lipschitz constants in x are operator norms of the x-Jacobians for
    affine problems, otherwise the largest norm over the ε-tube samples.
    """
    return _bounded_slope(problem, node_data(problem, traj, tol_act, nodes=[node])[0], kappa, seed)


def _bounded_slope(problem, nd: NodeData, kappa, seed) -> dict:
    if problem.affine:
        method, lipschitz = "operator_norm", _lipschitz_linear(problem, nd)
    else:
        method, lipschitz = "tube_sampling", _lipschitz_sampled(problem, nd, seed)
    total = sum(lipschitz.values())
    k_S = 0.0 if total == 0.0 else kappa * total
    ratio = float("inf") if k_S == 0.0 else problem.radius / k_S
    return {"k_S": k_S, "lipschitz": lipschitz, "method": method, "radius_ratio": ratio}


@dataclass
class CqVerdict:
    """Constraint-qualification audit at one node."""

    node: int
    t: float
    licq: str
    sigma_min: float
    quasi_normality: str
    witness: Optional[List[float]]
    wbcq_violated: Optional[bool]
    linear_condition: bool
    kappa: float
    patterns: int
    bounded_slope: dict = field(default_factory=dict)

    @property
    def error_bound_certified(self) -> bool:
        """Return True when the linear condition or the no-multiplier condition holds."""
        return self.linear_condition or self.quasi_normality == "holds_via_no_multiplier"

    def to_dict(self) -> dict:
        """Return a JSON-friendly description."""
        return {
            "node": self.node,
            "t": self.t,
            "licq": self.licq,
            "sigma_min": self.sigma_min,
            "quasi_normality": self.quasi_normality,
            "witness": self.witness,
            "wbcq_violated": self.wbcq_violated,
            "linear_condition": self.linear_condition,
            "kappa": self.kappa,
            "kappa_scope": "face-exact",
            "patterns": self.patterns,
            "bounded_slope": self.bounded_slope,
            "error_bound_certified": self.error_bound_certified,
        }


def _audit(problem: OcpecProblem, nd: NodeData, tol_sv, seed) -> CqVerdict:
    licq, sigma = _licq(nd, tol_sv)
    abnormal = _abnormal(nd)
    if licq == "holds" and abnormal.witness is not None:
        log.warning("node %d: LICQ holds but an abnormal witness was found", nd.index)
    kappa, patterns = _kappa(nd, tol_sv, abnormal)
    return CqVerdict(
        node=nd.index,
        t=nd.t,
        licq=licq,
        sigma_min=sigma,
        quasi_normality=abnormal.verdict,
        witness=None if abnormal.witness is None else abnormal.witness.tolist(),
        wbcq_violated=abnormal.wbcq_violated,
        linear_condition=linear_condition(problem),
        kappa=kappa,
        patterns=patterns,
        bounded_slope=_bounded_slope(problem, nd, kappa, seed),
    )


def audit_node(problem: OcpecProblem, traj: DiscreteTrajectory, node, tol_sv=1e-8, tol_act=1e-6, seed=0) -> CqVerdict:
    """Return the full constraint-qualification verdict at one node."""
    return _audit(problem, node_data(problem, traj, tol_act, nodes=[node])[0], tol_sv, seed)


def audit(
    problem: OcpecProblem,
    traj: DiscreteTrajectory,
    tol_sv=1e-8,
    tol_act=1e-6,
    seed=0,
    nodes: Optional[Sequence[int]] = None,
) -> List[CqVerdict]:
    """Return the verdict at every requested control node."""
    verdicts = [_audit(problem, nd, tol_sv, seed) for nd in node_data(problem, traj, tol_act, nodes)]
    failing = sum(v.licq == "fails" for v in verdicts)
    log.info("constraint qualifications audited at %d nodes, LICQ fails at %d", len(verdicts), failing)
    return verdicts
