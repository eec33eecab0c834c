"""Exception hierarchy shared across the package.

Every module raises subclasses of :class:`WqbenchError` so callers can
distinguish contract violations from ordinary bugs.
"""


class WqbenchError(Exception):
    """Base class for all package errors."""


class DimensionError(WqbenchError):
    """Operand shapes are incompatible for the requested operation."""


class DomainError(WqbenchError):
    """A value lies outside the mathematical domain of the operation."""


class ContractError(WqbenchError):
    """An API precondition was violated (wrong type, wrong state)."""


class ConfigurationError(WqbenchError):
    """A configuration value is missing, malformed, or out of range."""


class IngestionError(WqbenchError):
    """An input file violates the on-disk schema."""


class NormalizationError(WqbenchError):
    """Normalization statistics cannot be fitted or applied."""


class SplitError(WqbenchError):
    """A split plan cannot be satisfied by the dataset."""


class CorruptionError(WqbenchError):
    """A corruption request cannot be honoured."""


class MetricUndefinedError(WqbenchError):
    """The metric is mathematically undefined for the given inputs."""


class InsufficientDataError(WqbenchError):
    """Too few observations to evaluate the quantity."""


class DegenerateTestError(WqbenchError):
    """A statistical test has no information to work with."""


class SweepError(WqbenchError):
    """A robustness sweep produced no usable comparisons."""


class AttributionRunError(WqbenchError):
    """An attribution protocol could not complete its scheduled runs."""
