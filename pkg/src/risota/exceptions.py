"""Error hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto
categorized, nonzero process exit statuses.
"""


class RisotaError(Exception):
    exit_code = 1


class ConfigurationError(RisotaError, ValueError):
    exit_code = 2


class InvalidGeometryError(RisotaError, ValueError):
    exit_code = 3


class ShapeError(RisotaError, ValueError):
    exit_code = 4


class DataError(RisotaError, ValueError):
    exit_code = 5


class FormatError(DataError):
    pass


class ConsistencyError(DataError):
    pass


class PartitionError(DataError):
    pass


class DataIOError(RisotaError, OSError):
    exit_code = 6


class OutputError(RisotaError, OSError):
    exit_code = 7


class NumericalError(RisotaError, ArithmeticError):
    exit_code = 8


class DeepFadeError(NumericalError):
    """Estimated effective channel too small to invert."""


class ClientSkippedError(RisotaError):
    exit_code = 9


class IncompleteLogError(RisotaError, KeyError):
    exit_code = 10


class SingularBoundError(NumericalError):
    pass
