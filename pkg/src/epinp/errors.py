"""Exception hierarchy shared by the library and the CLI."""


class EpinpError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(EpinpError, ValueError):
    exit_code = 2


class DataError(EpinpError, ValueError):
    exit_code = 3


class ParameterError(EpinpError, ValueError):
    """Invalid model parameters (negative rates, unbounded rate functions...)."""

    exit_code = 2


class NumericalError(EpinpError, ArithmeticError):
    exit_code = 4


class InitializationError(NumericalError):
    """No valid augmented state could be constructed for a sampler."""
