"""Error hierarchy shared by the library and the CLI.

Each error class carries the process exit code the CLI maps it to:
2 for bad input, 3 for fits that diverge, 4 for capacity limits.
"""

from typing import Optional


class FlipScoutError(Exception):
    """Base class for all Flip Scout errors."""

    exit_code = 1


class InputError(FlipScoutError, ValueError):
    """Exception raised for unusable input data or arguments."""

    exit_code = 2


class ParseError(InputError):
    """Exception raised for a malformed row in an input file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataValidationError(InputError):
    """Exception raised when a value violates a data invariant."""

    def __init__(
        self, message: str, entity: Optional[str] = None, timestamp: Optional[str] = None
    ):
        self.entity = entity
        self.timestamp = timestamp
        super().__init__(message)


class InsufficientDataError(InputError):
    """Exception raised when too few time bins remain for an operation."""

    pass


class ShapeError(InputError):
    """Exception raised for dimension mismatches between inputs."""

    pass


class DegenerateRunError(InputError):
    """Exception raised when a prediction run holds a single outcome class."""

    pass


class SupportError(InputError):
    """Exception raised when a model assigns zero mass where data has mass."""

    pass


class AttainabilityError(InputError):
    """Exception raised when no latent correlation reproduces a binary moment."""

    def __init__(self, message: str, pair: Optional[tuple[int, int]] = None):
        self.pair = pair
        super().__init__(message)


class UndefinedCorrelationError(InputError):
    """Exception raised when a correlation involves a constant series."""

    pass


class FitDivergenceError(FlipScoutError):
    """Exception raised when an objective becomes non-finite during a fit."""

    exit_code = 3

    def __init__(self, message: str, iteration: int = 0, fold: Optional[int] = None):
        self.iteration = iteration
        self.fold = fold
        super().__init__(message)


class CapacityError(FlipScoutError):
    """Exception raised when exact enumeration would exceed the configured cap."""

    exit_code = 4
