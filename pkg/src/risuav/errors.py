"""Exception types raised across the simulator and trainers."""


class RisUavError(Exception):
    """Base class for all errors raised by this package."""


class ZeroDistanceError(RisUavError, ValueError):
    pass


class NonpositiveDistanceError(RisUavError, ValueError):
    pass


class LengthMismatchError(RisUavError, ValueError):
    pass


class TauOutOfRangeError(RisUavError, ValueError):
    pass


class IndexOutOfRangeError(RisUavError, IndexError):
    pass


class VelocityExceedsMaxError(RisUavError, ValueError):
    pass


class ShapeMismatchError(RisUavError, ValueError):
    pass


class EmptyBatchError(RisUavError, ValueError):
    pass


class StaleBatchError(RisUavError, RuntimeError):
    """A trajectory batch was collected by a different policy version."""


class IntractableGridError(RisUavError, ValueError):
    pass


class EmptyInputError(RisUavError, ValueError):
    pass


class ConfigError(RisUavError, ValueError):
    pass
