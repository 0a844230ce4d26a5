"""Trajectory module."""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ocpecx.models.errors import DimensionError


@dataclass(frozen=True, eq=False)
class DiscreteTrajectory:
    """Uniform grid with N + 1 state nodes and N control nodes."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        if self.x.shape[0] != self.t.shape[0]:
            raise DimensionError("x", (self.t.shape[0], self.x.shape[1]), self.x.shape)
        if self.u.shape[0] != self.t.shape[0] - 1:
            raise DimensionError("u", (self.t.shape[0] - 1, self.u.shape[1]), self.u.shape)

    @classmethod
    def grid(cls, t0, t1, N):
        """Return the uniform grid t_k = t0 + k·h, k = 0..N.

        Example:
            >>> DiscreteTrajectory.grid(0.0, 1.0, 4).tolist()
            [0.0, 0.25, 0.5, 0.75, 1.0]
        """
        return np.linspace(t0, t1, N + 1)

    @property
    def N(self) -> int:
        """Return the number of intervals."""
        return self.t.shape[0] - 1

    @property
    def h(self) -> float:
        """Return the step size."""
        return float((self.t[-1] - self.t[0]) / self.N)

    @property
    def n(self) -> int:
        """Return the state dimension."""
        return self.x.shape[1]

    @property
    def m(self) -> int:
        """Return the control dimension."""
        return self.u.shape[1]

    def columns(self):
        """Return the CSV header `t,x1..xn,u1..um`."""
        return ["t"] + [f"x{i + 1}" for i in range(self.n)] + [f"u{j + 1}" for j in range(self.m)]

    def to_frame(self) -> pd.DataFrame:
        """Return one row per state node, the last control repeated on the final row.

        Example:
            >>> traj = DiscreteTrajectory(np.array([0.0, 0.5, 1.0]), np.zeros((3, 1)), np.ones((2, 1)))
            >>> traj.to_frame().shape, list(traj.to_frame().columns)
            ((3, 3), ['t', 'x1', 'u1'])
        """
        u = np.vstack([self.u, self.u[-1:]])
        return pd.DataFrame(np.column_stack([self.t, self.x, u]), columns=self.columns())

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, n, m):
        """Build a trajectory from a frame laid out as `to_frame` writes it."""
        expected = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)]
        if list(frame.columns) != expected:
            raise DimensionError("trajectory columns", tuple(expected), tuple(frame.columns))
        values = frame.to_numpy(dtype=float)
        return cls(values[:, 0], values[:, 1 : 1 + n], values[:-1, 1 + n :])

    @classmethod
    def read_csv(cls, path, n, m):
        """Read a trajectory CSV."""
        return cls.from_frame(pd.read_csv(path), n, m)
