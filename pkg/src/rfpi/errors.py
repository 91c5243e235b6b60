"""Exception hierarchy shared by every module."""


class RFPIError(Exception):
    """Base class for all errors raised by :mod:`rfpi`."""


class InvalidParameter(RFPIError, ValueError):
    pass


class NonFinite(RFPIError, FloatingPointError):
    pass


class DegenerateInterval(RFPIError, ValueError):
    pass


class UndersampledKernel(RFPIError):
    """The oscillatory kernel cannot be resolved on the chosen grid for this step."""


class BoundaryLeak(RFPIError):
    """Too much probability mass sits next to the truncated box boundary."""


class GridTooCoarse(RFPIError):
    pass


class LinearSolveFailure(RFPIError):
    pass


class AnsatzBreakdown(RFPIError):
    """The Gaussian width lost its positive real part."""


class IndexOutOfRange(RFPIError, IndexError):
    pass


class NotIdenticalParticles(RFPIError):
    pass


class ResourceLimit(RFPIError):
    pass


class ConfigError(RFPIError):
    pass


def check_finite(arr, what="value"):
    import numpy as np

    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"non-finite {what}")
    return arr
