"""Transcription module.

Direct transcription of an OCPEC on a uniform grid (explicit-Euler defects,
left-endpoint quadrature) and its solution by a Scholtes relaxation homotopy:
each pair 0 ≤ G ⊥ H ≥ 0 is replaced by G ≥ 0, H ≥ 0, G∘H ≤ τ, and each
relaxed NLP is solved by a safeguarded PHR augmented Lagrangian whose
bound-constrained subproblems go to L-BFGS-B. A final polish projects the
last iterate onto the identified active pieces by Gauss-Newton.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, minimize
from scipy.sparse.linalg import lsqr

from ocpecx.models.compgeom import FEASIBILITY_TOL, pair_distance
from ocpecx.models.errors import ConfigError, DimensionError, OcpecError
from ocpecx.models.lcp import simulate_lcs
from ocpecx.models.problem import OcpecProblem
from ocpecx.models.trajectory import DiscreteTrajectory

log = logging.getLogger(__name__)

MULTIPLIER_CAP = 1e8


@dataclass(frozen=True)
class HomotopySchedule:
    """Relaxation schedule and solver settings."""

    tau0: float = 1e-1
    factor: float = 0.1
    tau_min: float = 1e-8
    max_outer: int = 30
    inner_maxiter: int = 300
    stall_iterations: int = 50
    rho0: float = 10.0
    rho_max: float = 1e10
    feas_tol: float = 1e-9
    polish: bool = True
    polish_tol: float = 1e-3
    polish_radius: float = 1e-1

    def __post_init__(self):
        if not 0.0 < self.factor < 1.0:
            raise ConfigError("homotopy factor must lie in (0, 1)")
        if not 0.0 < self.tau_min <= self.tau0:
            raise ConfigError("need 0 < tau_min <= tau0")

    @property
    def taus(self) -> List[float]:
        """Return the strictly decreasing relaxation parameters.

        Example:
            >>> taus = HomotopySchedule(tau0=1.0, tau_min=0.01).taus
            >>> len(HomotopySchedule().taus), len(taus), round(taus[-1], 12)
            (8, 3, 0.01)
        """
        taus = [self.tau0]
        while taus[-1] * self.factor >= self.tau_min * (1.0 - 1e-9):
            taus.append(taus[-1] * self.factor)
        return taus

    def stage_tolerance(self, tau) -> float:
        """Return the first-order tolerance of a stage."""
        return max(1e-8, tau * 1e-2)


@dataclass(frozen=True)
class ResidualReport:
    """Max-norm residual of each constraint family.

    `complementarity` is the largest distance of a pair (G_i, H_i) to C¹.
    """

    dynamics: float
    equality: float
    inequality: float
    G: float
    H: float
    complementarity: float
    bounds: float

    @property
    def max(self) -> float:
        """Return the largest residual."""
        return max(asdict(self).values())

    def to_dict(self) -> dict:
        """Return a JSON-friendly description."""
        return dict(asdict(self), max=self.max)


@dataclass(frozen=True)
class StageRecord:
    """Outcome of one relaxation stage."""

    tau: float
    complementarity: float
    infeasibility: float
    kkt: float
    iterations: int
    status: str
    accepted: bool = False
    retained: bool = False


@dataclass
class SolveInfo:
    """Homotopy history and final diagnostics."""

    stages: List[StageRecord] = field(default_factory=list)
    status: str = "stalled"
    iterations: int = 0
    polished: bool = False
    objective: float = float("nan")
    residuals: Optional[ResidualReport] = None
    returned_stage: Optional[int] = None

    def to_dict(self) -> dict:
        """Return a JSON-friendly description."""
        return {
            "stages": [asdict(stage) for stage in self.stages],
            "status": self.status,
            "iterations": self.iterations,
            "polished": self.polished,
            "objective": self.objective,
            "residuals": None if self.residuals is None else self.residuals.to_dict(),
            "returned_stage": self.returned_stage,
        }


class FiniteMpec:
    """Finite MPEC in z = (x_0..x_N, u_0..u_{N−1})."""

    def __init__(self, problem: OcpecProblem, N) -> None:
        """Build the transcription of `problem` on N intervals."""
        if N < 2:
            raise ConfigError("N must be at least 2")
        p = problem
        self.problem = p
        self.N = int(N)
        self.t = DiscreteTrajectory.grid(p.t0, p.t1, self.N)
        self.h = (p.t1 - p.t0) / self.N
        self.nx = (self.N + 1) * p.n
        self.size = self.nx + self.N * p.m
        self.lower, self.upper = self._bounds()
        self._step = self._step_matrix()
        self._patterns = {}

    def _bounds(self):
        p = self.problem
        lower = np.full(self.size, -np.inf)
        upper = np.full(self.size, np.inf)
        lower[: p.n], upper[: p.n] = p.endpoint.initial.lo, p.endpoint.initial.hi
        lower[self.nx - p.n : self.nx] = p.endpoint.final.lo
        upper[self.nx - p.n : self.nx] = p.endpoint.final.hi
        lower[self.nx :] = np.tile(p.control_set.lo, self.N)
        upper[self.nx :] = np.tile(p.control_set.hi, self.N)
        return lower, upper

    def _step_matrix(self):
        rows = np.arange(self.N * self.problem.n)
        ones = np.ones(rows.size)
        shape = (rows.size, self.size)
        forward = sp.csr_matrix((ones, (rows, rows + self.problem.n)), shape=shape)
        return forward - sp.csr_matrix((ones, (rows, rows)), shape=shape)

    @property
    def counts(self) -> dict:
        """Return the number of defects, equalities, inequalities and pairs.

        Example:
            >>> from ocpecx.models.problem import counterexample
            >>> FiniteMpec(counterexample(), 4).counts
            {'state_nodes': 5, 'control_nodes': 4, 'defects': 4, 'equalities': 0, 'inequalities': 0, 'pairs': 4}
        """
        p = self.problem
        return {
            "state_nodes": self.N + 1,
            "control_nodes": self.N,
            "defects": self.N * p.n // max(p.n, 1),
            "equalities": self.N * p.l2,
            "inequalities": self.N * p.l1,
            "pairs": self.N * p.l,
        }

    def split(self, z):
        """Return (x, u) of shapes (N + 1, n) and (N, m)."""
        p = self.problem
        return z[: self.nx].reshape(self.N + 1, p.n), z[self.nx :].reshape(self.N, p.m)

    def join(self, x, u) -> np.ndarray:
        """Return the decision vector of (x, u)."""
        return np.concatenate([np.ravel(x), np.ravel(u)])

    def point(self, traj: DiscreteTrajectory) -> np.ndarray:
        """Return the decision vector of a trajectory on the same grid."""
        if traj.N != self.N or traj.n != self.problem.n or traj.m != self.problem.m:
            raise DimensionError("trajectory", (self.N, self.problem.n, self.problem.m), (traj.N, traj.n, traj.m))
        return self.join(traj.x, traj.u)

    def trajectory(self, z) -> DiscreteTrajectory:
        """Return the trajectory of a decision vector."""
        x, u = self.split(np.asarray(z, dtype=float))
        return DiscreteTrajectory(self.t.copy(), x.copy(), u.copy())

    def evaluate(self, z) -> dict:
        """Return every node oracle evaluated at the control nodes."""
        x, u = self.split(z)
        return {name: oracle(self.t[:-1], x[:-1], u) for name, oracle in self.problem.oracles.items()}

    def _pattern(self, k):
        """Return (indices, indptr, order) of the CSR pattern of a k-row node oracle."""
        if k not in self._patterns:
            N, n, m = self.N, self.problem.n, self.problem.m
            node = np.arange(N)[:, None, None]
            out = node * k + np.arange(k)[None, :, None]
            rows = np.concatenate([np.broadcast_to(out, (N, k, n)).ravel(), np.broadcast_to(out, (N, k, m)).ravel()])
            cols = np.concatenate(
                [
                    np.broadcast_to(node * n + np.arange(n)[None, None, :], (N, k, n)).ravel(),
                    np.broadcast_to(self.nx + node * m + np.arange(m)[None, None, :], (N, k, m)).ravel(),
                ]
            )
            slots = np.arange(1, rows.size + 1, dtype=float)
            template = sp.csr_matrix((slots, (rows, cols)), shape=(N * k, self.size))
            self._patterns[k] = (template.indices, template.indptr, template.data.astype(int) - 1)
        return self._patterns[k]

    def node_jacobian(self, ev) -> sp.csr_matrix:
        """Return the sparse Jacobian in z of a node oracle stacked over the nodes."""
        k = ev.dx.shape[1]
        indices, indptr, order = self._pattern(k)
        data = np.concatenate([ev.dx.ravel(), ev.du.ravel()])[order]
        return sp.csr_matrix((data, indices, indptr), shape=(self.N * k, self.size))

    def _vjp(self, ev, weights) -> np.ndarray:
        """Return Jᵀw of a node oracle for node weights of shape (N, k)."""
        p = self.problem
        grad = np.zeros(self.size)
        grad[: self.nx - p.n] = np.einsum("nki,nk->ni", ev.dx, weights).ravel()
        grad[self.nx :] = np.einsum("nkj,nk->nj", ev.du, weights).ravel()
        return grad

    def values(self, z, tau, ev=None):
        """Return the objective, the equality values and the inequality values."""
        p = self.problem
        ev = self.evaluate(z) if ev is None else ev
        x, _ = self.split(z)
        f = self.h * float(ev["running_cost"].value.sum()) + p.endpoint_cost(x[0], x[-1]).value
        defects = x[1:] - x[:-1] - self.h * ev["dynamics"].value
        ce = np.concatenate([defects.ravel(), ev["h"].value.ravel()])
        G, H = ev["G"].value.ravel(), ev["H"].value.ravel()
        ci = np.concatenate([ev["g"].value.ravel(), -G, -H, G * H - tau])
        return float(f), ce, ci

    def lagrangian_gradient(self, z, y, w, ev=None) -> np.ndarray:
        """Return ∇f + Jₑᵀy + Jᵢᵀw without assembling either Jacobian."""
        p = self.problem
        N = self.N
        ev = self.evaluate(z) if ev is None else ev
        x, _ = self.split(z)
        end = p.endpoint_cost(x[0], x[-1])
        grad = self.h * self._vjp(ev["running_cost"], np.ones((N, 1)))
        grad[: p.n] += end.d0
        grad[self.nx - p.n : self.nx] += end.d1

        nd = N * p.n
        defect_w = y[:nd].reshape(N, p.n)
        grad[p.n : self.nx] += defect_w.ravel()
        grad[: self.nx - p.n] -= defect_w.ravel()
        grad -= self.h * self._vjp(ev["dynamics"], defect_w)
        grad += self._vjp(ev["h"], y[nd:].reshape(N, p.l2))

        o1, o2, o3 = N * p.l1, N * (p.l1 + p.l), N * (p.l1 + 2 * p.l)
        product_w = w[o3:].reshape(N, p.l)
        grad += self._vjp(ev["g"], w[:o1].reshape(N, p.l1))
        grad += self._vjp(ev["G"], product_w * ev["H"].value - w[o1:o2].reshape(N, p.l))
        grad += self._vjp(ev["H"], product_w * ev["G"].value - w[o2:o3].reshape(N, p.l))
        return grad

    def objective(self, z, ev=None):
        """Return h·Σ F(t_k, x_k, u_k) + f(x_0, x_N) and its gradient.

        Example:
            >>> from ocpecx.models.problem import counterexample
            >>> fm = FiniteMpec(counterexample(), 4)
            >>> value, grad = fm.objective(np.arange(9.0))
            >>> value, grad[:5].tolist()
            (4.0, [0.0, 0.0, 0.0, 0.0, 1.0])
        """
        p = self.problem
        ev = self.evaluate(z) if ev is None else ev
        x, _ = self.split(z)
        running = ev["running_cost"]
        end = p.endpoint_cost(x[0], x[-1])
        value = self.h * float(running.value.sum()) + end.value
        grad = self.h * self._vjp(running, np.ones((self.N, 1)))
        grad[: p.n] += end.d0
        grad[self.nx - p.n : self.nx] += end.d1
        return float(value), grad

    def equalities(self, z, ev=None):
        """Return the Euler defects and h-values with their Jacobian."""
        ev = self.evaluate(z) if ev is None else ev
        x, _ = self.split(z)
        phi = ev["dynamics"]
        defects = (x[1:] - x[:-1] - self.h * phi.value).ravel()
        jac = self._step - self.h * self.node_jacobian(phi)
        values = np.concatenate([defects, ev["h"].value.ravel()])
        return values, sp.vstack([jac, self.node_jacobian(ev["h"])], format="csr")

    def inequalities(self, z, tau, ev=None):
        """Return c(z) ≤ 0 stacked as (g, −G, −H, G∘H − τ) with its Jacobian."""
        ev = self.evaluate(z) if ev is None else ev
        G, H = ev["G"].value.ravel(), ev["H"].value.ravel()
        JG, JH = self.node_jacobian(ev["G"]), self.node_jacobian(ev["H"])
        shape = (G.size, G.size)
        jac_product = sp.diags(H, 0, shape=shape) @ JG + sp.diags(G, 0, shape=shape) @ JH
        values = np.concatenate([ev["g"].value.ravel(), -G, -H, G * H - tau])
        jac = sp.vstack([self.node_jacobian(ev["g"]), -JG, -JH, jac_product], format="csr")
        return values, jac


def discretize(p: OcpecProblem, N) -> FiniteMpec:
    """Return the transcription of p on N intervals."""
    return FiniteMpec(p, N)


def residuals(fm: FiniteMpec, point) -> ResidualReport:
    """Return the max-norm residual of each constraint family at a point.

    Example:
        >>> from ocpecx.models.problem import counterexample
        >>> fm = FiniteMpec(counterexample(), 4)
        >>> z = np.zeros(fm.size)
        >>> z[fm.nx] += 1.0
        >>> report = residuals(fm, z)
        >>> report.G, report.H, round(report.complementarity, 6)
        (1.0, 1.0, 1.414214)
    """
    z = fm.point(point) if isinstance(point, DiscreteTrajectory) else np.asarray(point, dtype=float)
    if z.shape != (fm.size,):
        raise DimensionError("point", (fm.size,), z.shape)
    ev = fm.evaluate(z)
    x, _ = fm.split(z)
    defects = x[1:] - x[:-1] - fm.h * ev["dynamics"].value
    G, H = ev["G"].value, ev["H"].value
    return ResidualReport(
        dynamics=float(np.max(np.abs(defects), initial=0.0)),
        equality=float(np.max(np.abs(ev["h"].value), initial=0.0)),
        inequality=float(np.max(ev["g"].value, initial=0.0)),
        G=float(np.max(-G, initial=0.0)),
        H=float(np.max(-H, initial=0.0)),
        complementarity=float(np.max(pair_distance(G, H), initial=0.0)),
        bounds=float(max(np.max(fm.lower - z, initial=0.0), np.max(z - fm.upper, initial=0.0))),
    )


class AugmentedLagrangian:
    """Safeguarded PHR augmented Lagrangian for the relaxed NLPs."""

    hformat = "%-5s  %9s  %9s  %9s  %9s  %9s  %6s"
    header = hformat % ("outer", "merit", "infeas", "kkt", "compl", "rho", "inner")
    format = "%-5d  %9.2e  %9.2e  %9.2e  %9.2e  %9.2e  %6d"

    def __init__(self, fm: FiniteMpec, sched: HomotopySchedule) -> None:
        """Build the solver with zero multiplier estimates."""
        self.fm = fm
        self.sched = sched
        self.bounds = Bounds(fm.lower, fm.upper)
        self.rho = sched.rho0
        _, ce, ci = fm.values(np.zeros(fm.size), 0.0)
        self.y = np.zeros(ce.size)
        self.w = np.zeros(ci.size)

    def merit(self, z, tau):
        """Return the augmented Lagrangian and its gradient."""
        ev = self.fm.evaluate(z)
        f, ce, ci = self.fm.values(z, tau, ev)
        shifted = np.maximum(0.0, self.w + self.rho * ci)
        value = f + self.y @ ce + 0.5 * self.rho * ce @ ce + (shifted @ shifted - self.w @ self.w) / (2 * self.rho)
        grad = self.fm.lagrangian_gradient(z, self.y + self.rho * ce, shifted, ev)
        return value, grad

    def _kkt(self, z):
        grad = self.fm.lagrangian_gradient(z, self.y, self.w)
        return float(np.max(np.abs(np.clip(z - grad, self.fm.lower, self.fm.upper) - z), initial=0.0))

    def solve_stage(self, z, tau):
        """Solve one relaxed NLP from z; return the iterate and its record."""
        sched = self.sched
        best_infeas = best_kkt = prev_infeas = np.inf
        since, total, status = 0, 0, "max_iter"
        infeas = kkt = np.inf
        log.debug(self.header)
        for outer in range(1, sched.max_outer + 1):
            res = minimize(
                self.merit,
                z,
                args=(tau,),
                jac=True,
                method="L-BFGS-B",
                bounds=self.bounds,
                options={"maxiter": sched.inner_maxiter, "ftol": 1e-15, "gtol": 1e-12},
            )
            z = np.clip(res.x, self.fm.lower, self.fm.upper)
            total += res.nit
            since += max(res.nit, 1)
            _, ce, ci = self.fm.values(z, tau)
            infeas = float(max(np.max(np.abs(ce), initial=0.0), np.max(np.abs(np.minimum(-ci, self.w / self.rho)), initial=0.0)))
            self.y = np.clip(self.y + self.rho * ce, -MULTIPLIER_CAP, MULTIPLIER_CAP)
            self.w = np.clip(self.w + self.rho * ci, 0.0, MULTIPLIER_CAP)
            kkt = self._kkt(z)
            log.debug(self.format, outer, res.fun, infeas, kkt, _complementarity(self.fm, z), self.rho, res.nit)
            if infeas <= sched.feas_tol and kkt <= sched.stage_tolerance(tau):
                status = "converged"
                break
            if infeas < 0.999 * best_infeas or kkt < 0.999 * best_kkt:
                best_infeas, best_kkt = min(best_infeas, infeas), min(best_kkt, kkt)
                since = 0
            elif since >= sched.stall_iterations:
                status = "stalled"
                break
            if infeas > 0.25 * prev_infeas:
                self.rho = min(10.0 * self.rho, sched.rho_max)
            prev_infeas = infeas
        record = StageRecord(tau, _complementarity(self.fm, z), infeas, kkt, total, status)
        return z, record


def _complementarity(fm, z) -> float:
    ev = fm.evaluate(z)
    return float(np.max(np.abs(ev["G"].value * ev["H"].value), initial=0.0))


def initial_guess(fm: FiniteMpec) -> np.ndarray:
    """Return the LCS simulation when available, else zeros, clipped to the bounds."""
    z = np.zeros(fm.size)
    if fm.problem.linear is not None:
        try:
            z = fm.point(simulate_lcs(fm.problem, fm.N))
        except OcpecError as error:
            log.warning("no simulated initial guess: %s", error)
    return np.clip(z, fm.lower, fm.upper)


def polish(fm: FiniteMpec, z, sched: HomotopySchedule, max_iter=20):
    """Project z onto the identified active pieces; return (point, accepted).

    Each pair keeps G = 0 where G ≤ H and H = 0 otherwise, both when both are
    below `polish_tol`; near-active g and near-active bounds become equalities.
    """
    tol = sched.polish_tol
    start = np.asarray(z, dtype=float)
    ev = fm.evaluate(start)
    G, H = ev["G"].value.ravel(), ev["H"].value.ravel()
    both = (G <= tol) & (H <= tol)
    pick_G = both | (G <= H)
    pick_H = both | (H < G)
    pick_g = ev["g"].value.ravel() >= -tol
    near_lo = start <= fm.lower + tol
    near_hi = start >= fm.upper - tol
    free = ~(near_lo | near_hi)
    point = np.where(near_lo, fm.lower, np.where(near_hi, fm.upper, start))

    for _ in range(max_iter):
        ev = fm.evaluate(point)
        ce, Je = fm.equalities(point, ev)
        c = np.concatenate(
            [ce, ev["G"].value.ravel()[pick_G], ev["H"].value.ravel()[pick_H], ev["g"].value.ravel()[pick_g]]
        )
        if np.max(np.abs(c), initial=0.0) <= 1e-15:
            break
        J = sp.vstack(
            [
                Je,
                fm.node_jacobian(ev["G"])[pick_G],
                fm.node_jacobian(ev["H"])[pick_H],
                fm.node_jacobian(ev["g"])[pick_g],
            ],
            format="csc",
        )[:, free]
        step = lsqr(J, c, atol=1e-15, btol=1e-15, iter_lim=10 * fm.size)[0]
        if np.max(np.abs(step), initial=0.0) <= 1e-16:
            break
        point[free] -= step
        point = np.clip(point, fm.lower, fm.upper)

    before, after = residuals(fm, start).max, residuals(fm, point).max
    moved = float(np.max(np.abs(point - start), initial=0.0))
    accepted = bool(np.all(np.isfinite(point)) and after <= before and moved <= sched.polish_radius)
    log.info("polish %s: residual %.2e -> %.2e, moved %.2e", "accepted" if accepted else "rejected", before, after, moved)
    return (point, True) if accepted else (start, False)


def solve_homotopy(fm: FiniteMpec, sched: HomotopySchedule, z0=None):
    """Run the relaxation homotopy; return (trajectory, SolveInfo).

    A stage whose complementarity residual exceeds that of the previously
    accepted iterate keeps that iterate when it already satisfies G∘H ≤ τ.
    When the last stage is not accepted the last accepted iterate is
    returned instead and the status is "stalled".
    """
    z = initial_guess(fm) if z0 is None else np.clip(np.asarray(z0, dtype=float), fm.lower, fm.upper)
    solver = AugmentedLagrangian(fm, sched)
    info = SolveInfo()
    accepted_z, accepted_compl, accepted_stage = None, np.inf, None
    log.info("%-9s  %9s  %9s  %9s  %6s  %s", "tau", "compl", "infeas", "kkt", "iter", "status")
    for tau in sched.taus:
        candidate, record = solver.solve_stage(z, tau)
        if accepted_z is not None and record.complementarity > accepted_compl and accepted_compl <= tau + sched.feas_tol:
            candidate = accepted_z.copy()
            record = replace(record, complementarity=accepted_compl, retained=True)
        record = replace(record, accepted=record.complementarity <= tau + sched.feas_tol)
        if record.accepted:
            accepted_z, accepted_compl, accepted_stage = candidate.copy(), record.complementarity, len(info.stages)
        z = candidate
        info.stages.append(record)
        info.iterations += record.iterations
        log.info(
            "%-9.2e  %9.2e  %9.2e  %9.2e  %6d  %s%s",
            tau,
            record.complementarity,
            record.infeasibility,
            record.kkt,
            record.iterations,
            record.status,
            " (retained)" if record.retained else "",
        )

    finished = info.stages[-1].accepted
    info.returned_stage = len(info.stages) - 1
    if not finished and accepted_z is not None:
        log.warning("last stage not accepted; returning the iterate of stage %d", accepted_stage)
        z, info.returned_stage = accepted_z, accepted_stage
    if sched.polish:
        z, info.polished = polish(fm, z, sched)
    report = residuals(fm, z)
    info.residuals = report
    info.objective = fm.objective(z)[0]
    violation = max(report.dynamics, report.equality, report.inequality, report.G, report.H, report.bounds)
    feasible = violation <= FEASIBILITY_TOL
    converged = finished and feasible and _complementarity(fm, z) <= max(sched.tau_min, 1e-8) * 10
    info.status = "converged" if converged else "stalled"
    log.info("homotopy %s: objective %.6g, max residual %.2e", info.status, info.objective, report.max)
    return fm.trajectory(z), info
