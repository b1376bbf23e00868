"""Shared exception types for specrank."""


class SpecrankError(Exception):
    """Base class for all specrank errors."""


class EmptyMatrix(SpecrankError):
    """Raised when a loaded matrix has no rows or no columns."""


class ParseError(SpecrankError):
    """Raised on a non-numeric cell; carries 1-based (row, col) file coordinates."""

    def __init__(self, row: int, col: int, message: str | None = None):
        self.row = row
        self.col = col
        super().__init__(message or f"non-numeric cell at row {row}, col {col}")


class ShapeMismatch(SpecrankError):
    """Raised when two matrices that must share a shape do not."""


class NotCentered(SpecrankError):
    """Raised when an operation requires column-centered input."""


class ConvergenceFailure(SpecrankError):
    """Raised when the iterative eigensolver fails to reach tolerance."""

    def __init__(self, iterations: int, message: str | None = None):
        self.iterations = iterations
        super().__init__(message or f"eigensolver failed to converge after {iterations} iterations")


class DomainError(SpecrankError):
    """Raised when a numeric argument is outside its mathematical domain."""


class DegenerateSpectrum(SpecrankError):
    """Raised when the trailing spectrum is numerically zero and the noise variance is undefined."""


class DegenerateScale(SpecrankError):
    """Raised when a distribution scale parameter collapses to zero."""


class SeriesTooShort(SpecrankError):
    """Raised when a change-point series has fewer than 3 elements."""


class SeriesTooLong(SpecrankError):
    """Raised when a series is too long for exact partition enumeration."""


class PriorLengthMismatch(SpecrankError):
    """Raised when a prior sequence does not match its series length."""
