"""Exception hierarchy shared across the package."""


class MsfcError(Exception):
    """Base class for all package errors."""


class DataError(MsfcError, ValueError):
    """Input data is malformed or cannot support the requested operation."""


class InvalidSplitError(DataError):
    pass


class DegenerateScaleError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class DegenerateInputError(DataError):
    pass


class IngestionError(DataError):
    pass


class NumericalError(MsfcError, ArithmeticError):
    """A numerical routine failed (divergence, undefined metric, ...)."""


class NotSiftableError(NumericalError):
    pass


class InsufficientKnotsError(NumericalError):
    pass


class CorruptDecompositionError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass


class UndefinedMetricError(NumericalError):
    pass


class CapabilityError(MsfcError, TypeError):
    """A regressor lacks a capability the strategy needs."""


class ShapeError(MsfcError, ValueError):
    pass


class ConfigError(MsfcError, ValueError):
    pass
