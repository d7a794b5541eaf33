"""Exception hierarchy shared by every module."""


class SphrfError(Exception):
    """Base class for library errors."""


class ZeroVector(SphrfError, ValueError):
    pass


class DegeneratePoint(SphrfError, ValueError):
    pass


class InvalidRange(SphrfError, ValueError):
    pass


class InvalidParam(SphrfError, ValueError):
    pass


class OutOfDomain(SphrfError, ValueError):
    pass


class ShapeMismatch(SphrfError, ValueError):
    pass


class DescriptorMismatch(SphrfError, ValueError):
    pass


class UnknownDescriptor(SphrfError, ValueError):
    pass


class NoSources(SphrfError, ValueError):
    pass


class NoHit(SphrfError, RuntimeError):
    """A ray escaped the scene; only happens for scenes that are not closed."""


class ConfigError(SphrfError, ValueError):
    pass


class NumericalError(SphrfError, ArithmeticError):
    pass


class ImageFormatError(SphrfError, ValueError):
    """A file that does not decode as the expected image format."""
