"""Adjoint view module."""

import numpy as np
import pandas as pd

from ocpecx.models.stationarity import AdjointArc
from ocpecx.views.artifact import Artifact


class AdjointTable(Artifact):
    """AdjointTable class."""

    filename = "adjoint.csv"

    def __init__(self, adj: AdjointArc) -> None:
        """Build the plot data of p(·)."""
        self.adj = adj

    def frame(self):
        """Return `t,p1..pn` with one row per state node."""
        columns = ["t"] + [f"p{i + 1}" for i in range(self.adj.p.shape[1])]
        return pd.DataFrame(np.column_stack([self.adj.t, self.adj.p]), columns=columns)
