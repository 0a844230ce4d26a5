"""Report view module."""

import json
import math

import numpy as np

from ocpecx.views.artifact import Artifact


def jsonable(value):
    """Return value with numpy types converted and non-finite floats spelled out.

    Example:
        >>> jsonable({"kappa": np.inf, "nodes": np.arange(2), "ok": np.bool_(True)})
        {'kappa': 'inf', 'nodes': [0, 1], 'ok': True}
    """
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


class Report(Artifact):
    """Report class."""

    filename = "report.json"

    def __init__(self, content: dict) -> None:
        """Build a report."""
        self.content = content

    def dumps(self) -> str:
        """Return the report as sorted, indented JSON.

        Example:
            >>> print(Report({"b": 1.5, "a": float("inf")}).dumps())
            {
              "a": "inf",
              "b": 1.5
            }
        """
        return json.dumps(jsonable(self.content), sort_keys=True, indent=2, allow_nan=False)

    def write(self, directory):
        """Write the report and return its path."""
        path = self.path(directory)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps() + "\n", encoding="utf-8")
        return path
