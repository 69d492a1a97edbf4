"""Exception hierarchy shared across the package."""


class SeqvolError(Exception):
    """Base class for all seqvol errors."""


class NotPositiveDefinite(SeqvolError):
    """A matrix required to be symmetric positive definite is not."""


class DimensionMismatch(SeqvolError):
    """Operands have incompatible dimensions."""


class DomainError(SeqvolError):
    """A scalar parameter lies outside its admissible range."""


class RankMismatch(SeqvolError):
    """A matrix does not have the rank required by the operation."""


class EmptyInput(SeqvolError):
    """An operation received an empty collection where data is required."""


class ParseError(SeqvolError):
    """Malformed input file; carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NonPositivePrice(ParseError):
    """A price level is <= 0, so its log-return is undefined."""


class FilterNumericalError(SeqvolError):
    """Numerical failure inside a sequential run; carries the step index."""

    def __init__(self, t: int, cause: Exception):
        super().__init__(f"numerical failure at step t={t}: {cause}")
        self.t = t
        self.cause = cause
