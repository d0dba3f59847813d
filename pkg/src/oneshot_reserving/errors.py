"""Exception hierarchy shared by all reserving modules."""


class ReservingError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(ReservingError, ValueError):
    """Input data does not match the canonical claims schema."""


class CensoredCellError(ReservingError, LookupError):
    """A cell beyond the evaluation date was read without ground truth."""


class ConfigError(ReservingError, ValueError):
    """Invalid configuration value.

    ``field`` names the offending configuration entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalError(ReservingError, ArithmeticError):
    """Base class for degenerate fits and numerical failures."""


class DegenerateTriangleError(NumericalError):
    """A chain-ladder denominator is zero or negative."""

    def __init__(self, j: int, message: str | None = None):
        self.j = j
        super().__init__(message or f"non-positive denominator at development index j={j}")


class SingularFitError(NumericalError):
    """The design matrix is rank deficient."""

    def __init__(self, columns, message: str | None = None):
        self.columns = list(columns)
        super().__init__(message or f"rank-deficient design; dependent columns: {self.columns}")


class InsufficientDataError(ReservingError, ValueError):
    """Not enough observations for the requested estimator."""


class TrainingError(NumericalError):
    """Neural network training diverged."""
