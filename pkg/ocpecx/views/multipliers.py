"""Multipliers view module."""

import numpy as np
import pandas as pd

from ocpecx.models.stationarity import MultiplierSet
from ocpecx.views.artifact import Artifact


class MultiplierTable(Artifact):
    """MultiplierTable class."""

    filename = "multipliers.csv"

    def __init__(self, lam: MultiplierSet, eta: MultiplierSet) -> None:
        """Build a multiplier table from the Euler-inclusion and Hamiltonian sets."""
        self.lam = lam
        self.eta = eta

    def columns(self):
        """Return `t,lamG1..,lamH1..,etaG1..,etaH1..,residual`.

        Example:
            >>> z = np.zeros((2, 1))
            >>> lam = MultiplierSet(np.zeros(2), z[:, :0], z[:, :0], z, z, z, np.zeros(2))
            >>> MultiplierTable(lam, lam).columns()
            ['t', 'lamG1', 'lamH1', 'etaG1', 'etaH1', 'residual']
        """
        l = self.lam.lam_G.shape[1]  # noqa: E741
        names = ["t"]
        for prefix in ("lamG", "lamH", "etaG", "etaH"):
            names += [f"{prefix}{i + 1}" for i in range(l)]
        return names + ["residual"]

    def frame(self):
        """Return one row per control node."""
        values = np.column_stack(
            [self.lam.t, self.lam.lam_G, self.lam.lam_H, self.eta.lam_G, self.eta.lam_H, self.lam.residual]
        )
        return pd.DataFrame(values, columns=self.columns())
