"""Exception types raised across the package."""


class SurfMotionError(Exception):
    """Base class for all package errors."""


class ValidationError(SurfMotionError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(SurfMotionError, ArithmeticError):
    """A numerical procedure failed (singular system, bad factorization, ...)."""


class PoleProximity(ValidationError):
    pass


class DegenerateMetric(NumericalError):
    pass


class NotTangent(ValidationError):
    pass


class InvalidIndex(ValidationError):
    pass


class NegativeOrderOnConstant(ValidationError):
    pass


class LevelTooLarge(ValidationError):
    pass


class SingularSystem(NumericalError):
    pass


class NonPositiveRadius(NumericalError):
    pass


class FrameOutOfRange(ValidationError):
    pass


class FormatError(ValidationError):
    pass


class DimensionMismatch(FormatError):
    pass


class DegenerateConfiguration(ValidationError):
    pass


class NodeMismatch(ValidationError):
    pass


class IndefiniteSystem(NumericalError):
    pass


class ZeroGradient(NumericalError):
    pass


class IoError(SurfMotionError, OSError):
    pass
