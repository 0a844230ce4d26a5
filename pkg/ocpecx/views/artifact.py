"""Artifact view module."""

from pathlib import Path

import pandas as pd

from ocpecx.views import FLOAT_FORMAT


class Artifact:
    """Artifact class."""

    filename = None

    def frame(self) -> pd.DataFrame:
        """Return the rows of the artifact."""
        raise NotImplementedError

    def path(self, directory) -> Path:
        """Return the artifact path inside an output directory."""
        return Path(directory) / self.filename

    def write(self, directory) -> Path:
        """Write the artifact as CSV and return its path."""
        path = self.path(directory)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.frame().to_csv(path, index=False, float_format=FLOAT_FORMAT)
        return path
