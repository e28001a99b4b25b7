"""Exception types raised across the package."""


class DynHTMError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DynHTMError, ValueError):
    pass


class InvalidParameterError(DynHTMError, ValueError):
    pass


class DivergenceError(DynHTMError, ArithmeticError):
    """Integration produced a non-finite state."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"integration diverged at step {step}")


class InsufficientDataError(DynHTMError, ValueError):
    pass


class DegenerateInputError(DynHTMError, ValueError):
    pass


class AlignmentError(DynHTMError, ValueError):
    pass


class ConfigError(DynHTMError, ValueError):
    """Configuration failed to parse or validate; ``path`` names the offending key."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
