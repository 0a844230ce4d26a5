"""Run configuration module."""

from dataclasses import asdict, dataclass, fields
from typing import Optional

from ocpecx.models.errors import ConfigError
from ocpecx.models.transcription import HomotopySchedule
from ocpecx.resources import load_defaults

COMMANDS = ("simulate", "solve", "check", "cq", "pipeline")

TOLERANCES = ("tau0", "tau_min", "tol_act", "tol_div", "tol_recover", "tol_sv", "tol_w", "sample_radius")


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one command-line run."""

    command: str
    problem: str
    nodes: int = 100
    tau0: float = 1e-1
    factor: float = 1e-1
    tau_min: float = 1e-8
    polish: bool = True
    tol_act: float = 1e-6
    tol_div: float = 1e-6
    tol_recover: float = 1e-6
    tol_sv: float = 1e-8
    tol_w: float = 1e-8
    samples: int = 200
    seed: int = 0
    sample_radius: float = 10.0
    eps_meas: float = 0.0
    max_pivots: int = 1000
    out: str = "out"
    radius: Optional[float] = None
    traj: Optional[str] = None
    lambda0: Optional[int] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.nodes < 2:
            raise ConfigError("nodes must be at least 2")
        for name in TOLERANCES:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.radius is not None and not self.radius > 0:
            raise ConfigError("radius must be positive")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if not 0.0 <= self.eps_meas < 1.0:
            raise ConfigError("eps_meas must lie in [0, 1)")
        if self.lambda0 not in (None, 0, 1):
            raise ConfigError("lambda0 must be 0 or 1")
        if self.command in ("check", "cq") and self.traj is None:
            raise ConfigError(f"{self.command} needs --traj")

    @classmethod
    def from_args(cls, args, defaults=None):
        """Build a configuration from the defaults file overridden by parsed arguments.

        Example:
            >>> from argparse import Namespace
            >>> config = RunConfig.from_args(Namespace(command="solve", problem="builtin:counterexample", nodes=20))
            >>> config.nodes, config.tau_min, config.samples
            (20, 1e-08, 200)
        """
        values = dict(load_defaults() if defaults is None else defaults)
        values.update({key: value for key, value in vars(args).items() if value is not None})
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - names - {"verbose"})
        if unknown:
            raise ConfigError(f"unknown settings {', '.join(unknown)}")
        return cls(**{key: value for key, value in values.items() if key in names})

    @property
    def schedule(self) -> HomotopySchedule:
        """Return the homotopy schedule."""
        return HomotopySchedule(tau0=self.tau0, factor=self.factor, tau_min=self.tau_min, polish=self.polish)

    def to_dict(self) -> dict:
        """Return every resolved setting."""
        return asdict(self)
