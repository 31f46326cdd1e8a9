"""Exception types shared across the package.

The CLI maps them onto exit codes: invalid input/configuration -> 2,
I/O -> 3, numeric failure -> 4.
"""


class CtxTuneError(Exception):
    """Base class for package errors."""


class InvalidArgument(CtxTuneError, ValueError):
    pass


class InvalidConfiguration(CtxTuneError, ValueError):
    pass


class NumericError(CtxTuneError, ArithmeticError):
    pass


class ParseError(CtxTuneError, ValueError):
    """Malformed input file. ``line`` is 1-based, or None if unknown."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
