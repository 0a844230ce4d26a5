"""Trajectory view module."""

from ocpecx.models.trajectory import DiscreteTrajectory
from ocpecx.views.artifact import Artifact


class TrajectoryTable(Artifact):
    """TrajectoryTable class."""

    filename = "trajectory.csv"

    def __init__(self, traj: DiscreteTrajectory) -> None:
        """Build a trajectory table."""
        self.traj = traj

    def frame(self):
        """Return `t,x1..xn,u1..um` with one row per state node."""
        return self.traj.to_frame()
