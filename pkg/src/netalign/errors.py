"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Input violates a documented precondition."""


class FormatError(ValueError):
    """A dataset file could not be parsed.

    The message always starts with ``path:line:`` so editors can jump to it.
    """

    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class UnsupervisedNotSupported(InvalidInputError):
    """Raised by aligners that need at least one anchor pair."""


class NumericError(ArithmeticError):
    """A solver produced NaN or infinite values it cannot recover from."""
