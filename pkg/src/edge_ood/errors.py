"""Exception hierarchy shared by all modules.

Every error the library raises derives from ``EdgeOodError`` so callers
(and the CLI) can catch the whole family at once.
"""


class EdgeOodError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EdgeOodError):
    """Array dimensions are inconsistent with the operation."""


class ParameterError(EdgeOodError):
    """A numeric parameter (k, bins, tpr target, ...) is out of range."""


class EmptyInputError(EdgeOodError):
    """An operation that needs at least one element received none."""


class DataError(EdgeOodError):
    """Dataset contents violate an invariant (non-binary labels, ...)."""


class NumericError(EdgeOodError):
    """A numeric routine failed (non-finite values, non-convergence)."""


class ConfigError(EdgeOodError):
    """A configuration file or object is invalid."""


class GenerationError(EdgeOodError):
    """Synthetic data generation could not satisfy its constraints."""
