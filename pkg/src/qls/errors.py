"""Exception types shared across the package."""


class QLSError(ValueError):
    """Base class for all domain errors raised by qls."""


class DimensionError(QLSError):
    pass


class NormalizationError(QLSError):
    pass


class ContourError(QLSError):
    """A contour is empty, degenerate, or a point is off its contour."""


class ChartExitError(QLSError):
    """A plane point falls outside the unit disk, so no state sits above it."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class IdenticalConicsError(QLSError):
    """Two conics coincide, so their intersection is a whole curve."""


class DomainError(QLSError):
    """A contour does not fit inside a grid with the required margin."""


class UnreachableTargetError(QLSError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class ConfigError(QLSError):
    pass
