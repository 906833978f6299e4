"""Exception hierarchy shared by all modules."""


class MHMMError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(MHMMError, ValueError):
    """Model parameters are malformed or inconsistent with the data."""


class ConfigError(MHMMError, ValueError):
    """Invalid user configuration (bad K, lambda, file schema, ...)."""


class NumericalError(MHMMError, ArithmeticError):
    """A computation produced a non-finite result."""


class UnderflowError(NumericalError):
    """Every hidden path has zero probability at some step.

    Attributes
    ----------
    step : int or None
        0-based time step at which the forward pass lost all mass.
    sequence : int or None
        Index of the offending sequence, when known.
    """

    def __init__(self, message, step=None, sequence=None):
        super().__init__(message)
        self.step = step
        self.sequence = sequence


class DatasetError(MHMMError, ValueError):
    """A data file could not be parsed under the requested schema."""
