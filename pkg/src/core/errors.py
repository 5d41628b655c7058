"""Exception hierarchy for the decay toolkit.

Library code raises these; the experiment engine catches them per experiment
(or per sweep cell), logs them and records the failure in the report.
"""

from typing import Optional


class QGDecayError(Exception):
    """Base class for all toolkit errors."""


class ResolutionError(QGDecayError):
    """A (grid, alpha, t) combination falls outside the resolution window."""


class MeanNotZeroError(QGDecayError):
    """A negative-order multiplier was applied to a field with nonzero mean."""


class QuadratureError(QGDecayError):
    """Radial quadrature failed to reach its tolerance."""

    def __init__(self, message: str, achieved_error: float) -> None:
        super().__init__(f"{message} (achieved error estimate {achieved_error:.3e})")
        self.achieved_error = achieved_error


class WindowError(QGDecayError):
    """A weighted-norm window exceeds the safe region |x| <= L/4."""


class CFLViolationError(QGDecayError):
    """The requested time step exceeds the advective CFL limit."""


class SolverDivergedError(QGDecayError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, dump_path: Optional[str] = None) -> None:
        suffix = f" (state dumped to {dump_path})" if dump_path else ""
        super().__init__(message + suffix)
        self.dump_path = dump_path


class InsufficientDataError(QGDecayError):
    """Too few samples, too short a span, or too coarse a trajectory."""


class ExponentError(QGDecayError):
    """Lebesgue or smoothness exponents outside the admissible range."""


class InitialDataError(QGDecayError):
    """Unknown initial-data family or invalid family parameters."""


class PicardDivergenceError(QGDecayError):
    """Picard iterates stopped contracting."""


class ConfigError(QGDecayError):
    """Schema violation in an experiment config; names the offending field."""

    def __init__(self, field_path: str, message: str) -> None:
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path
