from typing import Optional


class QppmException(Exception):
    """Common base for all exceptions that qppm might raise."""

    pass


class ParseError(QppmException):
    """Raised when a line of an input file cannot be parsed."""

    def __init__(self, message: str, source: str = "<stream>", line_no: Optional[int] = None) -> None:
        location = source if line_no is None else f"{source}:{line_no}"
        super().__init__(f"{location}: {message}")
        self.source = source
        self.line_no = line_no


class ValidationError(QppmException):
    """Raised when well-formed input data violates a data invariant (duplicates, gaps, non-finite values)."""

    pass


class ConfigurationError(QppmException):
    """Raised for invalid, unknown or missing configuration and specification values."""

    pass


class UndefinedCorrelation(QppmException):
    """Raised when a rank correlation is undefined (singleton sample or an all-tied side)."""

    def __init__(self, reason: str, message: Optional[str] = None) -> None:
        super().__init__(message if message is not None else f"Correlation is undefined: {reason}.")
        self.reason = reason


class StageError(QppmException):
    """Raised by the pipeline when one of its stages fails, wraps the original exception."""

    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
