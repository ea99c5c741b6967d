"""Exception types raised across the package."""


class KnnRadarError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(KnnRadarError, ValueError):
    pass


class DimensionMismatch(KnnRadarError, ValueError):
    pass


class DegenerateVector(KnnRadarError, ValueError):
    pass


class TransformSingularity(KnnRadarError, ValueError):
    pass


class SeriesNonConvergence(KnnRadarError, ArithmeticError):
    pass


class QuadratureNonConvergence(KnnRadarError, ArithmeticError):
    pass


class InvalidCombinatorics(KnnRadarError, ValueError):
    pass


class InsufficientTrials(KnnRadarError, ValueError):
    pass


class ConfigError(KnnRadarError, ValueError):
    pass
