"""Exception hierarchy shared by the library and the CLI."""


class HydrogeoError(Exception):
    """Base class for all library errors."""


class InvalidArgument(HydrogeoError, ValueError):
    pass


class AdmissibilityError(HydrogeoError, ValueError):
    """A density left the open interval on which the mobility is positive."""


class ConditioningError(HydrogeoError, ArithmeticError):
    """The response operator is too close to singular to invert reliably."""

    def __init__(self, message, min_chi=None):
        super().__init__(message)
        self.min_chi = min_chi


class DegeneratePlaneError(HydrogeoError, ArithmeticError):
    """Two tangent directions are (numerically) metrically parallel."""


class ConfigError(HydrogeoError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
