"""Stationarity module.

Recovers the adjoint arc and the Euler-inclusion multipliers λ of a feasible
trajectory, the pointwise Hamiltonian multipliers η, and compares both sets
under the W/C/M/S sign classes. Also runs the sampled Weierstrass check and
the cross-check against FJ stationarity of the inequality reformulation
G ≥ 0, H ≥ 0, GᵀH ≤ 0.

The discrete adjoint system is collocated at the control nodes:

    (p_{k+1} − p_k)/h = −∇ₓφᵀp_k + λ0∇ₓF + ∇ₓΨ·v_k
                    0 = −∇ᵤφᵀp_k + λ0∇ᵤF + ∇ᵤΨ·v_k + ζ_k,   ζ_k ∈ N_U(u_k)
                  p_0 = λ0∇_{x0}f + ξ0,   −p_N = λ0∇_{x1}f + ξ1

with v_k = (λᵍ, λʰ, λᴳ, λᴴ) and ξ0, ξ1 in the endpoint normal cones.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ocpecx.models.compgeom import FEASIBILITY_TOL, LABELS, IndexSets, pair_distance, sign_class, weakest
from ocpecx.models.errors import ConfigError, InfeasiblePointError
from ocpecx.models.node import NodeData, node_data
from ocpecx.models.problem import OcpecProblem
from ocpecx.models.qp import FREE, NONNEG, NONPOS, ZERO, solve_qp
from ocpecx.models.trajectory import DiscreteTrajectory
from ocpecx.models.transcription import FiniteMpec, residuals

log = logging.getLogger(__name__)

# sign codes of (ηᴳᵢ, ηᴴᵢ) per degenerate index
BRANCHES = {"G0": (ZERO, FREE), "H0": (FREE, ZERO), "S": (NONNEG, NONNEG)}
CONE_BRANCHES = dict(BRANCHES, N=(NONPOS, NONPOS))


@dataclass(frozen=True, eq=False)
class AdjointArc:
    """Adjoint values p_0..p_N with the cost multiplier and endpoint normals."""

    t: np.ndarray
    p: np.ndarray
    lambda0: float
    xi0: np.ndarray
    xi1: np.ndarray
    normalization: Optional[str] = None

    @property
    def nontrivial(self) -> bool:
        """Return True when max‖p‖ + λ0 > 0."""
        return float(np.max(np.abs(self.p), initial=0.0)) + self.lambda0 > 0.0

    def derivative(self) -> np.ndarray:
        """Return the forward differences (p_{k+1} − p_k)/h, one row per control node."""
        return np.diff(self.p, axis=0) / np.diff(self.t)[:, None]

    def to_dict(self) -> dict:
        """Return a JSON-friendly summary."""
        return {
            "lambda0": self.lambda0,
            "p0": self.p[0].tolist(),
            "pN": self.p[-1].tolist(),
            "xi0": self.xi0.tolist(),
            "xi1": self.xi1.tolist(),
            "normalization": self.normalization,
            "nontrivial": self.nontrivial,
        }


@dataclass(frozen=True, eq=False)
class MultiplierSet:
    """Node multipliers (λᵍ, λʰ, λᴳ, λᴴ), box normals ζ and residuals for nodes 0..N−1."""

    t: np.ndarray
    lam_g: np.ndarray
    lam_h: np.ndarray
    lam_G: np.ndarray
    lam_H: np.ndarray
    zeta: np.ndarray
    residual: np.ndarray

    @classmethod
    def from_vectors(cls, nodes: Sequence[NodeData], vectors, zetas, residual):
        """Build a set from per-node multiplier vectors v_k and normals ζ_k."""
        parts = [nd.split(v) for nd, v in zip(nodes, vectors)]
        return cls(
            t=np.array([nd.t for nd in nodes]),
            lam_g=np.array([part[0] for part in parts]).reshape(len(nodes), -1),
            lam_h=np.array([part[1] for part in parts]).reshape(len(nodes), -1),
            lam_G=np.array([part[2] for part in parts]).reshape(len(nodes), -1),
            lam_H=np.array([part[3] for part in parts]).reshape(len(nodes), -1),
            zeta=np.array(zetas, dtype=float).reshape(len(nodes), -1),
            residual=np.asarray(residual, dtype=float),
        )

    @property
    def N(self) -> int:
        """Return the number of nodes."""
        return self.t.shape[0]

    def vector(self, k) -> np.ndarray:
        """Return v_k = (λᵍ, λʰ, λᴳ, λᴴ) at node k."""
        return np.concatenate([self.lam_g[k], self.lam_h[k], self.lam_G[k], self.lam_H[k]])

    def stationary(self, tol) -> np.ndarray:
        """Return the nodes whose recovery residual is within tol."""
        return self.residual <= tol


class _Rows:
    """COO accumulator for block rows of a sparse system."""

    def __init__(self, size) -> None:
        self.size = size
        self.rows, self.cols, self.data, self.rhs = [], [], [], []
        self.count = 0

    def new(self, rhs) -> int:
        start = self.count
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        self.rhs.append(rhs)
        self.count += rhs.size
        return start

    def add(self, row, col, block):
        block = np.atleast_2d(np.asarray(block, dtype=float))
        r, c = np.indices(block.shape)
        self.rows.append((row + r).ravel())
        self.cols.append((col + c).ravel())
        self.data.append(block.ravel())

    def matrix(self):
        if not self.rows:
            return sp.csr_matrix((self.count, self.size)), np.zeros(self.count)
        coo = sp.coo_matrix(
            (np.concatenate(self.data), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.count, self.size),
        )
        rhs = np.concatenate(self.rhs) if self.rhs else np.zeros(0)
        return coo.tocsr(), rhs


class _AdjointSystem:
    """Global adjoint system over y = (p_0..p_N, (v_k, ζ_k)_k, ξ0, ξ1)."""

    def __init__(self, problem: OcpecProblem, traj: DiscreteTrajectory, nodes: List[NodeData], lambda0, tol_act):
        self.problem = problem
        self.traj = traj
        self.nodes = nodes
        self.lambda0 = lambda0
        n, m, N = problem.n, problem.m, traj.N
        self.nv = nodes[0].nv
        self.block = self.nv + m
        self.start = (N + 1) * n
        self.xi0 = self.start + N * self.block
        self.xi1 = self.xi0 + n
        self.size = self.xi1 + n
        self.h = traj.h
        self.end_codes = (
            problem.endpoint.initial.normal_codes(traj.x[0], tol_act),
            problem.endpoint.final.normal_codes(traj.x[-1], tol_act),
        )
        self.codes = self._codes()
        self.A, self.b = self._hard_rows()
        self.R, self.d = self._u_rows()
        self.V = self._variation()

    def v(self, k) -> int:
        return self.start + k * self.block

    def _codes(self):
        codes = np.full(self.size, FREE, dtype=int)
        for k, nd in enumerate(self.nodes):
            codes[self.v(k) : self.v(k) + self.nv] = nd.multiplier_codes()
            codes[self.v(k) + self.nv : self.v(k) + self.block] = nd.box_codes
        codes[self.xi0 : self.xi1] = self.end_codes[0]
        codes[self.xi1 :] = self.end_codes[1]
        return codes

    def _hard_rows(self):
        n, h, lambda0 = self.problem.n, self.h, self.lambda0
        rows = _Rows(self.size)
        eye = np.eye(n)
        for k, nd in enumerate(self.nodes):
            r = rows.new(h * lambda0 * nd.F_x)
            rows.add(r, (k + 1) * n, eye)
            rows.add(r, k * n, -eye + h * nd.phi_x.T)
            rows.add(r, self.v(k), -h * nd.psi_x)
        end = self.problem.endpoint_cost(self.traj.x[0], self.traj.x[-1])
        r = rows.new(lambda0 * end.d0)
        rows.add(r, 0, eye)
        rows.add(r, self.xi0, -eye)
        r = rows.new(lambda0 * end.d1)
        rows.add(r, self.traj.N * n, -eye)
        rows.add(r, self.xi1, -eye)
        return rows.matrix()

    def _u_rows(self):
        n, m = self.problem.n, self.problem.m
        rows = _Rows(self.size)
        for k, nd in enumerate(self.nodes):
            r = rows.new(-self.lambda0 * nd.F_u)
            rows.add(r, k * n, -nd.phi_u.T)
            rows.add(r, self.v(k), nd.psi_u)
            rows.add(r, self.v(k) + self.nv, np.eye(m))
        return rows.matrix()

    def _variation(self):
        n, N = self.problem.n, self.traj.N
        rows = np.arange(N * n)
        ones = np.ones(rows.size)
        shape = (rows.size, self.size)
        return sp.csr_matrix((ones, (rows, rows + n)), shape=shape) - sp.csr_matrix((ones, (rows, rows)), shape=shape)

    def normalizations(self):
        """Yield (label, row) pairs fixing one endpoint adjoint component to ±1."""
        n, N = self.problem.n, self.traj.N
        for side, codes, offset in (("p0", self.end_codes[0], 0), ("pN", self.end_codes[1], N * n)):
            for j in np.flatnonzero(codes != ZERO):
                for sign in (1.0, -1.0):
                    row = sp.csr_matrix(([1.0], ([0], [offset + j])), shape=(1, self.size))
                    yield f"{side}[{j}]={sign:+g}", (row, np.array([sign]))

    def solve(self, extra=None):
        """Return (y, per-node u-row residual norms)."""
        A, b = self.A, self.b
        if extra is not None:
            A, b = sp.vstack([A, extra[0]], format="csr"), np.concatenate([b, extra[1]])
        identity = sp.identity(self.size, format="csc")
        first = solve_qp(self.R.T @ self.R + 1e-12 * identity, -(self.R.T @ self.d), A, b, self.codes)
        shortfall = self.R @ first.x - self.d
        second = solve_qp(
            (2.0 / self.h) * (self.V.T @ self.V) + 2e-10 * self.h * identity,
            np.zeros(self.size),
            sp.vstack([A, self.R], format="csr"),
            np.concatenate([b, self.d + shortfall]),
            self.codes,
            fixed=first.fixed,
        )
        y = second.x
        if not second.optimal:
            log.warning("minimum-variation adjoint stage ended with status %s", second.status)
            y = first.x
        return y, self._node_residuals(y)

    def _node_residuals(self, y):
        r = (self.R @ y - self.d).reshape(self.traj.N, self.problem.m)
        return np.linalg.norm(r, axis=1)

    def unpack(self, y, node_residual, normalization):
        n, N = self.problem.n, self.traj.N
        arc = AdjointArc(
            t=self.traj.t.copy(),
            p=y[: (N + 1) * n].reshape(N + 1, n).copy(),
            lambda0=self.lambda0,
            xi0=y[self.xi0 : self.xi1].copy(),
            xi1=y[self.xi1 :].copy(),
            normalization=normalization,
        )
        vectors = [y[self.v(k) : self.v(k) + self.nv] for k in range(N)]
        zetas = [y[self.v(k) + self.nv : self.v(k) + self.block] for k in range(N)]
        return arc, MultiplierSet.from_vectors(self.nodes, vectors, zetas, node_residual)


def check_feasible(problem: OcpecProblem, traj: DiscreteTrajectory, tol=FEASIBILITY_TOL):
    """Raise InfeasiblePointError when the trajectory violates a constraint by more than tol."""
    report = residuals(FiniteMpec(problem, traj.N), traj)
    if report.max > tol:
        raise InfeasiblePointError(f"trajectory infeasible: max residual {report.max:.3e}", max_residual=report.max)
    return report


def default_lambda0(problem: OcpecProblem) -> List[int]:
    """Return the cost multipliers to try: 1 alone when an endpoint component is free, else 1 and 0."""
    return [1] if problem.endpoint.has_free_component else [1, 0]


def recover_adjoint(problem: OcpecProblem, traj: DiscreteTrajectory, lambda0=1, tol_act=1e-6, tol_recover=1e-6):
    """Recover the adjoint arc and the Euler-inclusion multipliers λ.

    One sign-constrained least-squares problem over the whole arc: the u-rows
    are minimised subject to the x-rows, transversality and the multiplier
    signs, then the minimum-variation adjoint is selected among the
    minimisers. Degenerate indices carry no sign. With λ0 = 0 one endpoint
    component of p is normalised to ±1 and the best normalisation is kept.
    Nodes whose residual exceeds tol_recover are reported, not raised.
    """
    if lambda0 not in (0, 1):
        raise ConfigError("lambda0 must be 0 or 1")
    check_feasible(problem, traj)
    nodes = node_data(problem, traj, tol_act)
    system = _AdjointSystem(problem, traj, nodes, float(lambda0), tol_act)
    normalization = None
    if lambda0:
        y, node_residual = system.solve()
    else:
        best = None
        for label, extra in system.normalizations():
            y, node_residual = system.solve(extra)
            if best is None or node_residual.max(initial=0.0) < best[1].max(initial=0.0) - 1e-12:
                best = (y, node_residual, label)
        if best is None:
            log.warning("no endpoint component admits a normalisation, the arc is trivial")
            y, node_residual = system.solve()
        else:
            y, node_residual, normalization = best
    arc, multipliers = system.unpack(y, node_residual, normalization)
    flagged = np.flatnonzero(node_residual > tol_recover)
    if flagged.size:
        log.warning("%d of %d nodes exceed the recovery tolerance %.1e", flagged.size, traj.N, tol_recover)
    log.info("adjoint recovered with lambda0=%g, max residual %.2e", lambda0, node_residual.max(initial=0.0))
    return arc, multipliers


@dataclass(frozen=True, eq=False)
class BranchSolution:
    """Least-squares solution of one branch system in (v, ζ)."""

    x: np.ndarray
    residual: float
    branch: Tuple[str, ...]
    level: str


def _branch_codes(base, pairs, table, branch):
    signs = base.copy()
    for (iG, iH), name in zip(pairs, branch):
        signs[iG], signs[iH] = table[name]
    return signs


def branch_least_squares(psi_u, b, codes, pairs, box_codes, tol) -> BranchSolution:
    """Solve min ‖∇ᵤΨ·v + ζ − b‖ over the sign branches of the degenerate pairs.

    The M-branches (ηᴳᵢ = 0, ηᴴᵢ = 0, or both ≥ 0 per index) are tried first
    and the smallest residual wins, ties going to the branch with more S
    choices. Above tol the C-branches (adding both ≤ 0) and then the
    unsigned system are tried.

    Example:
        >>> sol = branch_least_squares(np.array([[1.0, 0.0]]), np.array([-0.5]), np.array([0, 0]), [(0, 1)], np.array([2]), 1e-8)
        >>> sol.branch, sol.level, np.round(sol.x[:2], 9).tolist()
        (('H0',), 'M', [-0.5, 0.0])
    """
    psi_u = np.atleast_2d(np.asarray(psi_u, dtype=float))
    m, nv = psi_u.shape
    J = np.hstack([psi_u, np.eye(m)])
    Q = J.T @ J + 1e-12 * np.eye(nv + m)
    c = -J.T @ b
    scale = 1.0 + float(np.linalg.norm(b))
    base = np.concatenate([np.asarray(codes, dtype=int), np.asarray(box_codes, dtype=int)])
    for level, table in (("M", BRANCHES), ("C", CONE_BRANCHES)):
        best = None
        for branch in itertools.product(table, repeat=len(pairs)):
            res = solve_qp(Q, c, signs=_branch_codes(base, pairs, table, branch))
            r = float(np.linalg.norm(J @ res.x - b))
            if best is None or r < best.residual - 1e-12 * scale:
                best = BranchSolution(res.x, r, branch, level)
            elif r <= best.residual + 1e-12 * scale and branch.count("S") > best.branch.count("S"):
                best = BranchSolution(res.x, r, branch, level)
        if best.residual <= tol:
            return best
    branch = ("W",) * len(pairs)
    res = solve_qp(Q, c, signs=_branch_codes(base, pairs, {"W": (FREE, FREE)}, branch))
    r = float(np.linalg.norm(J @ res.x - b))
    return BranchSolution(res.x, r, branch, "W" if r <= tol else "fail")


@dataclass(frozen=True, eq=False)
class HamiltonianMultipliers:
    """Multipliers η of the pointwise Hamiltonian MPEC at one node."""

    node: int
    t: float
    eta: np.ndarray
    zeta: np.ndarray
    residual: float
    branch: Tuple[str, ...]
    level: str


def _hamiltonian_at(nd: NodeData, adj: AdjointArc, tol) -> HamiltonianMultipliers:
    b = nd.phi_u.T @ adj.p[nd.index] - adj.lambda0 * nd.F_u
    sol = branch_least_squares(nd.psi_u, b, nd.multiplier_codes(), nd.degenerate_pairs(), nd.box_codes, tol)
    return HamiltonianMultipliers(
        node=nd.index,
        t=nd.t,
        eta=sol.x[: nd.nv].copy(),
        zeta=sol.x[nd.nv :].copy(),
        residual=sol.residual,
        branch=sol.branch,
        level=sol.level,
    )


def hamiltonian_multipliers(
    problem: OcpecProblem, traj: DiscreteTrajectory, adj: AdjointArc, node, tol_act=1e-6, tol=1e-6
) -> HamiltonianMultipliers:
    """Return the M-stationarity multipliers η of the Hamiltonian MPEC at one node."""
    nd = node_data(problem, traj, tol_act, nodes=[node])[0]
    return _hamiltonian_at(nd, adj, tol)


def hamiltonian_multiplier_set(problem: OcpecProblem, traj: DiscreteTrajectory, adj: AdjointArc, tol_act=1e-6, tol=1e-6):
    """Return η at every control node as a MultiplierSet with the per-node solutions."""
    nodes = node_data(problem, traj, tol_act)
    solutions = [_hamiltonian_at(nd, adj, tol) for nd in nodes]
    failed = [s.node for s in solutions if s.level == "fail"]
    if failed:
        log.warning("Hamiltonian M-stationarity fails at %d nodes", len(failed))
    eta = MultiplierSet.from_vectors(
        nodes, [s.eta for s in solutions], [s.zeta for s in solutions], [s.residual for s in solutions]
    )
    return eta, solutions


def node_label(lam_G, lam_H, i_00, residual, tol, tol_recover) -> str:
    """Return the weakest sign class over the degenerate indices, "fail" above tol_recover.

    Example:
        >>> node_label(np.array([-0.5]), np.array([1.0]), (0,), 0.0, 1e-6, 1e-6)
        'W'
        >>> node_label(np.array([-0.5]), np.array([0.0]), (0,), 0.0, 1e-6, 1e-6)
        'M'
    """
    if not residual <= tol_recover:
        return "fail"
    return weakest(sign_class(lam_G[i], lam_H[i], tol).label for i in i_00)


def aggregate_label(labels, eps_meas=0.0) -> str:
    """Return the strongest label held on a node fraction of at least 1 − eps_meas.

    Example:
        >>> aggregate_label(["S", "M", "M", "M"])
        'M'
        >>> aggregate_label(["S", "W", "S", "S"], eps_meas=0.25)
        'S'
    """
    ranks = np.array([LABELS.index(label) for label in labels])
    for label in reversed(LABELS[1:]):
        if np.mean(ranks >= LABELS.index(label)) >= 1.0 - eps_meas - 1e-12:
            return label
    return "fail"


@dataclass(frozen=True, eq=False)
class StationarityReport:
    """Per-node labels of both multiplier sets and their divergence."""

    t: np.ndarray
    labels_lambda: Tuple[str, ...]
    labels_eta: Tuple[str, ...]
    residual_lambda: np.ndarray
    residual_eta: np.ndarray
    divergence: np.ndarray
    divergence_nodes: Tuple[int, ...]
    divergence_fraction: float
    aggregate_lambda: str
    aggregate_eta: str
    eps_meas: float = 0.0
    degenerate: Tuple[Tuple[int, ...], ...] = field(default_factory=tuple)

    def per_node(self) -> List[dict]:
        """Return one JSON-friendly record per control node."""
        return [
            {
                "node": k,
                "t": float(self.t[k]),
                "label_lambda": self.labels_lambda[k],
                "label_eta": self.labels_eta[k],
                "residual_lambda": float(self.residual_lambda[k]),
                "residual_eta": float(self.residual_eta[k]),
                "divergence": float(self.divergence[k]),
                "degenerate": list(self.degenerate[k]) if self.degenerate else [],
            }
            for k in range(self.t.shape[0])
        ]

    def to_dict(self) -> dict:
        """Return the aggregate and divergence summary."""
        return {
            "aggregate": {"label_lambda": self.aggregate_lambda, "label_eta": self.aggregate_eta, "eps_meas": self.eps_meas},
            "divergence": {
                "nodes": list(self.divergence_nodes),
                "fraction": self.divergence_fraction,
                "measure": "node_fraction",
            },
        }


def classify(
    lam: MultiplierSet,
    eta: MultiplierSet,
    index_sets: Sequence[IndexSets],
    tol,
    tol_div=1e-6,
    tol_recover=1e-6,
    eps_meas=0.0,
) -> StationarityReport:
    """Label every node for both multiplier sets and locate where λ and η differ."""
    if not lam.N == eta.N == len(index_sets):
        raise ValueError("multiplier sets and index sets cover different nodes")
    labels_lambda, labels_eta, divergence = [], [], []
    for k, sets in enumerate(index_sets):
        labels_lambda.append(node_label(lam.lam_G[k], lam.lam_H[k], sets.i_00, lam.residual[k], tol, tol_recover))
        labels_eta.append(node_label(eta.lam_G[k], eta.lam_H[k], sets.i_00, eta.residual[k], tol, tol_recover))
        divergence.append(float(np.max(np.abs(lam.vector(k) - eta.vector(k)), initial=0.0)))
    divergence = np.array(divergence)
    nodes = tuple(int(k) for k in np.flatnonzero(divergence > tol_div))
    return StationarityReport(
        t=lam.t.copy(),
        labels_lambda=tuple(labels_lambda),
        labels_eta=tuple(labels_eta),
        residual_lambda=lam.residual.copy(),
        residual_eta=eta.residual.copy(),
        divergence=divergence,
        divergence_nodes=nodes,
        divergence_fraction=len(nodes) / lam.N,
        aggregate_lambda=aggregate_label(labels_lambda, eps_meas),
        aggregate_eta=aggregate_label(labels_eta, eps_meas),
        eps_meas=eps_meas,
        degenerate=tuple(sets.i_00 for sets in index_sets),
    )


@dataclass
class WeierstrassResult:
    """Sampled Weierstrass violations and the nodes left unsampled."""

    violations: List[dict]
    unsampled: List[int]
    accepted: np.ndarray
    samples: int
    seed: int
    radius: float
    tol_w: float

    @property
    def ok(self) -> bool:
        """Return True when no sample improved the Hamiltonian."""
        return not self.violations

    def to_dict(self) -> dict:
        """Return a JSON-friendly description."""
        return {
            "violations": self.violations,
            "unsampled": self.unsampled,
            "accepted_min": int(self.accepted.min(initial=0)),
            "samples": self.samples,
            "seed": self.seed,
            "radius": self.radius,
            "ball": "open",
            "tol_w": self.tol_w,
        }


def _project_samples(problem: OcpecProblem, T, X, U, patterns, max_iter=100):
    """Gauss-Newton onto {G_i = 0 or H_i = 0 per pattern bit, h = 0}, clipped to U."""
    l = problem.l  # noqa: E741
    pick_G = ((patterns[:, None] >> np.arange(l)[None, :]) & 1) == 0
    if l + problem.l2 == 0:
        return U
    for _ in range(max_iter):
        ev_G, ev_H, ev_h = problem.G(T, X, U), problem.H(T, X, U), problem.h(T, X, U)
        r = np.concatenate([np.where(pick_G, ev_G.value, ev_H.value), ev_h.value], axis=1)
        J = np.concatenate([np.where(pick_G[..., None], ev_G.du, ev_H.du), ev_h.du], axis=1)
        step = -np.einsum("smk,sk->sm", np.linalg.pinv(J), r)
        U = problem.control_set.clip(U + step)
        if np.all(np.linalg.norm(step, axis=1) <= 1e-14 * (1.0 + np.linalg.norm(U, axis=1))):
            break
    return U


def _hamiltonian(problem, T, X, U, p, lambda0):
    return problem.dynamics(T, X, U).value @ p - lambda0 * problem.running_cost(T, X, U).value[:, 0]


def weierstrass_check(
    problem: OcpecProblem,
    traj: DiscreteTrajectory,
    adj: AdjointArc,
    samples=200,
    seed=0,
    tol_w=1e-8,
    sample_radius=10.0,
    feas_tol=1e-9,
) -> WeierstrassResult:
    """Sample feasible controls in the open ball around u*_k and flag Hamiltonian gains.

    A violation is a feasible u with pᵀφ(t, x*, u) − λ0F(t, x*, u) above its
    value at u* by more than tol_w. Samples are projected by Gauss-Newton onto
    the branch pattern (cycling through all 2^l) and the h equalities, then
    kept only when they lie in S(t_k) within feas_tol and strictly inside the
    ball. For an infinite radius the ball has radius `sample_radius`.
    """
    rng = np.random.default_rng(seed)
    radius = problem.radius if np.isfinite(problem.radius) else float(sample_radius)
    m = problem.m
    box = problem.control_set
    patterns = np.arange(samples) % (2 ** problem.l)
    violations, unsampled, accepted = [], [], []
    for k in range(traj.N):
        center = traj.u[k]
        directions = rng.standard_normal((samples, m))
        directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True), 1e-300)
        U = center + directions * (radius * rng.random(samples) ** (1.0 / m))[:, None]
        T = np.full(samples, traj.t[k])
        X = np.repeat(traj.x[k][None, :], samples, axis=0)
        U = _project_samples(problem, T, X, box.clip(U), patterns)

        G, H = problem.G(T, X, U).value, problem.H(T, X, U).value
        distance = np.linalg.norm(pair_distance(G, H).reshape(G.shape), axis=1)
        feasible = (
            (distance <= feas_tol)
            & np.all(problem.g(T, X, U).value <= feas_tol, axis=1)
            & np.all(np.abs(problem.h(T, X, U).value) <= feas_tol, axis=1)
            & np.all((U >= box.lo) & (U <= box.hi), axis=1)
            & (np.linalg.norm(U - center, axis=1) < radius)
        )
        accepted.append(int(feasible.sum()))
        if not feasible.any():
            unsampled.append(k)
            continue
        reference = _hamiltonian(problem, T[:1], X[:1], center[None, :], adj.p[k], adj.lambda0)[0]
        gain = np.where(feasible, _hamiltonian(problem, T, X, U, adj.p[k], adj.lambda0) - reference, -np.inf)
        worst = int(np.argmax(gain))
        if gain[worst] > tol_w:
            violations.append({"node": k, "t": float(traj.t[k]), "gain": float(gain[worst]), "u": U[worst].tolist()})
    if violations:
        log.warning("Weierstrass condition violated at %d nodes", len(violations))
    if unsampled:
        log.info("%d nodes had no feasible sample", len(unsampled))
    return WeierstrassResult(violations, unsampled, np.array(accepted), samples, seed, radius, tol_w)


def classical_fj_crosscheck(
    problem: OcpecProblem,
    traj: DiscreteTrajectory,
    adj: AdjointArc,
    lam: MultiplierSet,
    node,
    tol=1e-8,
    tol_act=1e-6,
):
    """Map S-multipliers to FJ multipliers of G ≥ 0, H ≥ 0, GᵀH ≤ 0 and verify them.

    α = λᴳ + γH and β = λᴴ + γG with the smallest γ ≥ 0 making α, β
    nonnegative on the nondegenerate indices. Returns (ok, residual, (α, β, γ)).
    Only meaningful at nodes labelled S with λ = η.
    """
    k = int(node)
    nd = node_data(problem, traj, tol_act, nodes=[k])[0]
    s = nd.index_sets
    lam_g, lam_h, lam_G, lam_H = lam.lam_g[k], lam.lam_h[k], lam.lam_G[k], lam.lam_H[k]
    gamma = 0.0
    for i in s.i_plus0:
        gamma = max(gamma, -lam_H[i] / nd.G[i])
    for i in s.i_0plus:
        gamma = max(gamma, -lam_G[i] / nd.H[i])
    alpha = lam_G + gamma * nd.H
    beta = lam_H + gamma * nd.G
    mu, nu = alpha - gamma * nd.H, beta - gamma * nd.G
    v = np.concatenate([lam_g, lam_h, mu, nu])
    p = adj.p[k]
    u_row = -nd.phi_u.T @ p + adj.lambda0 * nd.F_u + nd.psi_u @ v + lam.zeta[k]
    x_row = adj.derivative()[k] + nd.phi_x.T @ p - adj.lambda0 * nd.F_x - nd.psi_x @ v
    slackness = max(
        float(np.max(np.abs(alpha * nd.G), initial=0.0)),
        float(np.max(np.abs(beta * nd.H), initial=0.0)),
        abs(gamma * float(nd.G @ nd.H)),
        float(np.max(np.abs(lam_g * nd.g), initial=0.0)),
    )
    negativity = max(
        float(np.max(-alpha, initial=0.0)),
        float(np.max(-beta, initial=0.0)),
        float(np.max(-lam_g, initial=0.0)),
    )
    residual = max(
        float(np.max(np.abs(u_row), initial=0.0)),
        float(np.max(np.abs(x_row), initial=0.0)),
        slackness,
    )
    ok = negativity <= tol and residual <= tol
    return ok, residual, (alpha, beta, gamma)
