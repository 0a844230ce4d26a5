"""Errors module."""


class OcpecError(Exception):
    """Base class of every error raised by the package."""


class ConfigError(OcpecError, ValueError):
    """Invalid run configuration."""


class ProblemFileError(OcpecError, ValueError):
    """Problem description that cannot be turned into an instance."""

    def __init__(self, field, message) -> None:
        """Build a problem file error about `field`."""
        super().__init__(f"{field}: {message}")
        self.field = field


class DimensionError(ProblemFileError):
    """Matrix or vector whose shape contradicts the declared dimensions."""

    def __init__(self, field, expected, actual) -> None:
        """Build a dimension error.

        Example:
            >>> print(DimensionError("B", (1, 1), (1, 2)))
            B: dimension mismatch, expected (1, 1) got (1, 2)
        """
        super().__init__(field, f"dimension mismatch, expected {expected} got {actual}")
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class UnknownProblemError(OcpecError, KeyError):
    """Unknown builtin name or problem kind."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UnsupportedProblemError(OcpecError, ValueError):
    """Operation requested on an instance of the wrong kind."""


class InfeasiblePointError(OcpecError, ValueError):
    """Point outside the feasible set within tolerance."""

    def __init__(self, message, max_residual=None) -> None:
        """Build an infeasibility error carrying the largest residual."""
        super().__init__(message)
        self.max_residual = max_residual


class LcpError(OcpecError, RuntimeError):
    """Complementarity subproblem left unsolved during a simulation."""

    def __init__(self, node, status) -> None:
        """Build an LCP error for simulation node `node`."""
        super().__init__(f"LCP at node {node} ended with status {status}")
        self.node = node
        self.status = status
