"""Exception types raised by dasga."""


class InvalidParameterError(ValueError):
    """An argument is out of its valid range or has the wrong shape."""


class ConfigurationError(ValueError):
    """An experiment or label configuration cannot be satisfied."""


class ParseError(ValueError):
    """A data file could not be parsed.

    ``line`` holds the 1-based line (or row) number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalFailure(RuntimeError):
    """A numerical routine failed to produce a usable result."""
