"""Resources package."""

from pathlib import Path

import yaml

RESOURCES_PATH = Path(__file__).parent

DEFAULTS_PATH = RESOURCES_PATH / "defaults.yaml"


def load_defaults(path=DEFAULTS_PATH) -> dict:
    """Load the run defaults.

    Example:
        >>> defaults = load_defaults()
        >>> defaults["nodes"], defaults["tau0"], defaults["tau_min"]
        (100, 0.1, 1e-08)
    """
    with open(path, encoding="utf-8") as defaults_file:
        return yaml.safe_load(defaults_file)
