"""Exception types shared across the package."""


class CliqueLabError(Exception):
    """Base class for all package errors."""

    code = 1


class ArgumentError(CliqueLabError, ValueError):
    """An argument violates an operation's precondition."""

    code = 3


class ResourceError(CliqueLabError):
    """A configured size cap would be exceeded."""

    code = 4

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class HardnessGateError(CliqueLabError):
    """The mild-hardness precondition of the hard-core construction failed."""

    code = 5


class SamplerError(CliqueLabError):
    """A rejection sampler exceeded its iteration cap."""

    code = 6
