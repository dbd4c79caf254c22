"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3 and resource limits with 4.
"""


class WoodpileError(Exception):
    exit_code = 1


class DomainError(WoodpileError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class ConfigurationError(WoodpileError, ValueError):
    exit_code = 2


class NumericError(WoodpileError, ArithmeticError):
    exit_code = 3


class StabilityError(NumericError):
    """Field blow-up during time stepping."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ResolutionError(NumericError):
    """A spectral feature is narrower than the analysis can resolve."""


class ResourceError(WoodpileError, MemoryError):
    exit_code = 4

    def __init__(self, message, required_bytes=None):
        super().__init__(message)
        self.required_bytes = required_bytes
