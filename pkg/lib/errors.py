from typing import List, Optional, Sequence


class ScreeningError(Exception):
    """Base class for errors raised by the screening library."""


class StructuralError(ScreeningError, ValueError):
    """Inputs have the wrong shape: lengths, group indices, preconditions."""


class DomainError(ScreeningError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class TargetRangeError(ScreeningError, ValueError):
    """A calibration target cannot be reached by any threshold policy."""


class SweepSizeError(ScreeningError, ValueError):
    """A grid search would exceed its configured size cap."""


class SolverError(ScreeningError, RuntimeError):
    """The simplex method stopped without reaching a terminal status."""


class ConvergenceError(ScreeningError, RuntimeError):
    """An iterative fit did not converge.

    Attributes:
        last_iterate: Parameter vector at the final iteration
        iterations: Number of iterations performed
    """

    def __init__(self, message: str, last_iterate=None, iterations: int = 0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class GermanParseError(ScreeningError, ValueError):
    """A German Credit data row could not be parsed."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InstanceValidationError(ScreeningError, ValueError):
    """An instance failed schema or invariant validation."""

    def __init__(self, message: str, violations: Optional[Sequence] = None):
        super().__init__(message)
        self.violations: List = list(violations or [])
