"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class ConfigError(ValueError):
    """A configuration file or payoff schedule is inconsistent.

    ``key`` names the offending config entry when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class NotACorrelationError(InvalidInputError):
    """Matrix has an eigenvalue clearly below zero."""


class SingularCorrelationError(ArithmeticError):
    """Path weights need an invertible correlation factor."""


class NumericalError(ArithmeticError):
    """Non-finite values appeared during simulation."""
