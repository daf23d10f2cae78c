"""Exception hierarchy.

``DataError`` subclasses map to CLI exit code 2, ``ConfigError`` (a usage
problem) to exit code 1.
"""


class RetradeError(Exception):
    """Base class for all package errors."""


class ConfigError(RetradeError, ValueError):
    """Invalid parameters or configuration."""


class DataError(RetradeError, ValueError):
    """Input data cannot be processed."""


class EmptyPopulation(DataError):
    pass


class EmptyLog(DataError):
    pass


class NoTraders(DataError):
    pass


class DistributionError(ConfigError):
    pass


class NoRoot(DataError):
    pass


class NonStationary(DataError):
    pass


class DegeneratePrice(DataError):
    pass


class NonPositivePrice(DataError):
    pass


class TooShort(DataError):
    pass


class Empty(DataError):
    pass


class TailTooSmall(DataError):
    pass


class ZeroMagnitudes(DataError):
    pass


class NoValidTail(DataError):
    pass


class ZeroVariance(DataError):
    pass


class SpecError(ConfigError):
    pass


class DimensionMismatch(DataError):
    pass


class IdentityViolation(RetradeError, AssertionError):
    """The re-trade advantage identity failed beyond floating-point tolerance."""


class UtilityDomain(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ParseError):
    pass
