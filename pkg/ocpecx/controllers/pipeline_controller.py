"""Pipeline controller module."""

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from ocpecx import __version__
from ocpecx.controllers.config import RunConfig
from ocpecx.models.cq import audit as audit_cq, linear_condition
from ocpecx.models.errors import InfeasiblePointError, OcpecError
from ocpecx.models.lcp import LcpInstance, complementarity_residual, simulate_lcs
from ocpecx.models.node import node_data
from ocpecx.models.problem import load_problem
from ocpecx.models.stationarity import (
    check_feasible,
    classical_fj_crosscheck,
    classify,
    default_lambda0,
    hamiltonian_multiplier_set,
    recover_adjoint,
    weierstrass_check,
)
from ocpecx.models.trajectory import DiscreteTrajectory
from ocpecx.models.transcription import discretize, residuals, solve_homotopy
from ocpecx.views.adjoint import AdjointTable
from ocpecx.views.multipliers import MultiplierTable
from ocpecx.views.report import Report
from ocpecx.views.trajectory import TrajectoryTable

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INFEASIBLE = 2


class PipelineController:
    """PipelineController class."""

    def __init__(self, config: RunConfig) -> None:
        """Build a controller for one run."""
        self.config = config
        self.out = Path(config.out)
        self.stage = "load"
        self.problem = None
        self.report = {
            "command": config.command,
            "config": config.to_dict(),
            "seed": config.seed,
            "versions": {"ocpecx": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        }

    def run(self) -> int:
        """Run the configured command, write report.json and return the exit status."""
        code = EXIT_OK
        try:
            self.problem = self.load()
            getattr(self, self.config.command)()
            self.report.setdefault("status", "ok")
        except OcpecError as error:
            infeasible = isinstance(error, InfeasiblePointError)
            code = EXIT_INFEASIBLE if infeasible and self.stage == "check" else EXIT_FAILED
            self.report["status"] = "failed"
            self.report["error"] = {"stage": self.stage, "type": type(error).__name__, "message": str(error)}
            for attribute in ("field", "node", "max_residual"):
                if getattr(error, attribute, None) is not None:
                    self.report["error"][attribute] = getattr(error, attribute)
            log.error("%s failed: %s", self.stage, error)
        path = Report(self.report).write(self.out)
        log.info("report written to %s", path)
        return code

    def load(self):
        """Load the problem and apply the radius override."""
        problem = load_problem(self.config.problem)
        if self.config.radius is not None:
            problem = replace(problem, radius=float(self.config.radius))
        self.report["problem"] = {
            "name": problem.name,
            "t0": problem.t0,
            "t1": problem.t1,
            "sizes": {"n": problem.n, "m": problem.m, "l": problem.l, "l1": problem.l1, "l2": problem.l2},
            "radius": problem.radius,
            "endpoint": problem.endpoint.to_dict(),
            "U": problem.control_set.to_dict(),
        }
        self.report["N"] = self.config.nodes
        return problem

    def read_trajectory(self) -> DiscreteTrajectory:
        """Read the trajectory given by --traj."""
        self.stage = "read"
        try:
            traj = DiscreteTrajectory.read_csv(self.config.traj, self.problem.n, self.problem.m)
        except (OSError, ValueError, pd.errors.ParserError) as error:
            if isinstance(error, OcpecError):
                raise
            raise OcpecError(f"cannot read trajectory {self.config.traj}: {error}") from None
        self.report["N"] = traj.N
        return traj

    def simulate(self):
        """Simulate a linear complementarity system."""
        self.stage = "simulate"
        traj = simulate_lcs(self.problem, self.config.nodes, self.config.max_pivots)
        self._record_simulation(traj)
        TrajectoryTable(traj).write(self.out)
        return traj

    def _record_simulation(self, traj):
        d = self.problem.linear
        worst = max(complementarity_residual(LcpInstance(d.D, d.C @ x + d.q), u) for x, u in zip(traj.x, traj.u))
        self.report["simulate"] = {"lcp_residual": worst, "residuals": residuals(discretize(self.problem, traj.N), traj).to_dict()}

    def solve(self, z0=None):
        """Solve the relaxation homotopy."""
        self.stage = "solve"
        fm = discretize(self.problem, self.config.nodes)
        traj, info = solve_homotopy(fm, self.config.schedule, z0)
        self.report["solve"] = info.to_dict()
        TrajectoryTable(traj).write(self.out)
        if info.status != "converged":
            self.report["status"] = "stalled"
        return traj

    def check(self):
        """Check feasibility of a trajectory file and analyse its stationarity."""
        traj = self.read_trajectory()
        self.stage = "check"
        self.report["feasibility"] = check_feasible(self.problem, traj).to_dict()
        self.analyze(traj)

    def cq(self):
        """Audit the constraint qualifications along a trajectory file."""
        traj = self.read_trajectory()
        self.stage = "check"
        self.report["feasibility"] = check_feasible(self.problem, traj).to_dict()
        self.audit(traj)

    def pipeline(self):
        """Run simulate (linear problems), solve, stationarity and the CQ audit."""
        z0 = None
        if self.problem.linear is not None:
            try:
                sim = self.simulate()
                z0 = discretize(self.problem, self.config.nodes).point(sim)
            except OcpecError as error:
                log.warning("simulation skipped: %s", error)
                self.report["simulate"] = {"status": "failed", "message": str(error)}
        traj = self.solve(z0)
        self.analyze(traj)
        self.audit(traj)

    def analyze(self, traj):
        """Recover both multiplier sets, classify, sample the Weierstrass condition and cross-check."""
        self.stage = "stationarity"
        config = self.config
        candidates = [config.lambda0] if config.lambda0 is not None else default_lambda0(self.problem)
        index_sets = [nd.index_sets for nd in node_data(self.problem, traj, config.tol_act)]
        outcomes = []
        for lambda0 in candidates:
            adj, lam = recover_adjoint(self.problem, traj, lambda0, config.tol_act, config.tol_recover)
            eta, _ = hamiltonian_multiplier_set(self.problem, traj, adj, config.tol_act, config.tol_recover)
            report = classify(lam, eta, index_sets, config.tol_act, config.tol_div, config.tol_recover, config.eps_meas)
            outcomes.append((adj, lam, eta, report))
        adj, lam, eta, report = min(outcomes, key=lambda o: float(o[1].residual.max(initial=0.0)) > config.tol_recover)

        self.stage = "weierstrass"
        weierstrass = weierstrass_check(
            self.problem, traj, adj, config.samples, config.seed, config.tol_w, config.sample_radius
        )

        self.stage = "crosscheck"
        divergent = set(report.divergence_nodes)
        checked = [k for k, label in enumerate(report.labels_lambda) if label == "S" and k not in divergent]
        results = [classical_fj_crosscheck(self.problem, traj, adj, lam, k, tol_act=config.tol_act) for k in checked]

        self.report["lambda0"] = adj.lambda0
        self.report["adjoint"] = adj.to_dict()
        self.report["candidates"] = [
            {
                "lambda0": o[0].lambda0,
                "max_residual": float(o[1].residual.max(initial=0.0)),
                "aggregate": o[3].to_dict()["aggregate"],
            }
            for o in outcomes
        ]
        self.report["per_node"] = report.per_node()
        self.report.update(report.to_dict())
        self.report["weierstrass"] = weierstrass.to_dict()
        self.report["crosscheck"] = {
            "checked": len(checked),
            "passed": sum(ok for ok, _, _ in results),
            "failed_nodes": [k for k, (ok, _, _) in zip(checked, results) if not ok],
            "max_residual": max((r for _, r, _ in results), default=0.0),
        }
        MultiplierTable(lam, eta).write(self.out)
        AdjointTable(adj).write(self.out)

    def audit(self, traj):
        """Audit the constraint qualifications at every control node."""
        self.stage = "cq"
        config = self.config
        verdicts = audit_cq(self.problem, traj, config.tol_sv, config.tol_act, config.seed)
        self.report["cq"] = {
            "linear_condition": linear_condition(self.problem),
            "licq_fails": [v.node for v in verdicts if v.licq == "fails"],
            "inconclusive": [v.node for v in verdicts if v.quasi_normality == "inconclusive"],
            "nodes": [v.to_dict() for v in verdicts],
        }
