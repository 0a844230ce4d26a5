"""Node data module.

Per-node values, Jacobians and index sets of a trajectory, together with the
layout of the multiplier vector v = (λᵍ, λʰ, λᴳ, λᴴ) used by the adjoint,
Hamiltonian and constraint-qualification computations.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ocpecx.models.compgeom import FEASIBILITY_TOL, IndexSets, classify_indices
from ocpecx.models.problem import OcpecProblem
from ocpecx.models.qp import FREE, NONNEG, ZERO
from ocpecx.models.trajectory import DiscreteTrajectory


@dataclass(frozen=True, eq=False)
class NodeData:
    """Everything the stationarity conditions need at one control node."""

    index: int
    t: float
    x: np.ndarray
    u: np.ndarray
    phi_x: np.ndarray
    phi_u: np.ndarray
    F_x: np.ndarray
    F_u: np.ndarray
    g: np.ndarray
    h: np.ndarray
    G: np.ndarray
    H: np.ndarray
    g_x: np.ndarray
    g_u: np.ndarray
    h_x: np.ndarray
    h_u: np.ndarray
    G_x: np.ndarray
    G_u: np.ndarray
    H_x: np.ndarray
    H_u: np.ndarray
    index_sets: IndexSets
    box_codes: np.ndarray

    @property
    def sizes(self):
        """Return (l1, l2, l)."""
        return self.g.shape[0], self.h.shape[0], self.G.shape[0]

    @property
    def nv(self) -> int:
        """Return the multiplier vector length l1 + l2 + 2l."""
        l1, l2, l = self.sizes  # noqa: E741
        return l1 + l2 + 2 * l

    @property
    def psi_x(self) -> np.ndarray:
        """Return the matrix v ↦ ∇ₓΨ(v), of shape (n, nv)."""
        return np.hstack([self.g_x.T, self.h_x.T, -self.G_x.T, -self.H_x.T])

    @property
    def psi_u(self) -> np.ndarray:
        """Return the matrix v ↦ ∇ᵤΨ(v), of shape (m, nv)."""
        return np.hstack([self.g_u.T, self.h_u.T, -self.G_u.T, -self.H_u.T])

    def offsets(self):
        """Return the start of each block (λᵍ, λʰ, λᴳ, λᴴ) in v."""
        l1, l2, l = self.sizes  # noqa: E741
        return 0, l1, l1 + l2, l1 + l2 + l

    def split(self, v):
        """Return v as (λᵍ, λʰ, λᴳ, λᴴ)."""
        og, oh, oG, oH = self.offsets()
        return v[og:oh], v[oh:oG], v[oG:oH], v[oH:]

    def multiplier_codes(self) -> np.ndarray:
        """Return the sign codes of the Euler-inclusion multipliers.

        λᵍ vanishes on I⁻ and is nonnegative on I⁰, λᴳ vanishes on 𝓘⁺⁰ and
        λᴴ on 𝓘⁰⁺; every other component, degenerate ones included, is free.
        """
        s = self.index_sets
        codes = np.full(self.nv, FREE, dtype=int)
        og, _, oG, oH = self.offsets()
        codes[og + np.array(s.i_minus, dtype=int)] = ZERO
        codes[og + np.array(s.i_zero, dtype=int)] = NONNEG
        codes[oG + np.array(s.i_plus0, dtype=int)] = ZERO
        codes[oH + np.array(s.i_0plus, dtype=int)] = ZERO
        return codes

    def degenerate_pairs(self):
        """Return the (λᴳ, λᴴ) positions in v of each index of 𝓘⁰⁰."""
        _, _, oG, oH = self.offsets()
        return [(oG + i, oH + i) for i in self.index_sets.i_00]


def node_data(
    problem: OcpecProblem,
    traj: DiscreteTrajectory,
    tol_act,
    nodes: Optional[Sequence[int]] = None,
) -> List[NodeData]:
    """Evaluate every oracle at the control nodes of a trajectory.

    Raises `InfeasiblePointError` when a complementarity pair leaves C^l.
    """
    nodes = list(range(traj.N)) if nodes is None else [int(k) for k in nodes]
    t, x, u = traj.t[nodes], traj.x[nodes], traj.u[nodes]
    ev = {name: oracle(t, x, u) for name, oracle in problem.oracles.items()}
    box = problem.control_set
    data = []
    for i, k in enumerate(nodes):
        data.append(
            NodeData(
                index=k,
                t=float(t[i]),
                x=x[i],
                u=u[i],
                phi_x=ev["dynamics"].dx[i],
                phi_u=ev["dynamics"].du[i],
                F_x=ev["running_cost"].dx[i, 0],
                F_u=ev["running_cost"].du[i, 0],
                g=ev["g"].value[i],
                h=ev["h"].value[i],
                G=ev["G"].value[i],
                H=ev["H"].value[i],
                g_x=ev["g"].dx[i],
                g_u=ev["g"].du[i],
                h_x=ev["h"].dx[i],
                h_u=ev["h"].du[i],
                G_x=ev["G"].dx[i],
                G_u=ev["G"].du[i],
                H_x=ev["H"].dx[i],
                H_u=ev["H"].du[i],
                index_sets=classify_indices(
                    ev["g"].value[i], ev["G"].value[i], ev["H"].value[i], tol_act, FEASIBILITY_TOL
                ),
                box_codes=box.normal_codes(u[i], tol_act),
            )
        )
    return data
