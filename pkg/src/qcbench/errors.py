"""Exception hierarchy shared by every qcbench module."""


class QCBenchError(Exception):
    """Base class for all errors raised by qcbench."""


class GeometryError(QCBenchError, ValueError):
    pass


class BaseMismatch(GeometryError):
    """A tangent vector was used at a point other than its base point."""


class OutOfInjectivityRadius(GeometryError):
    pass


class AntipodalPoint(OutOfInjectivityRadius):
    """log requested between antipodal points of the sphere."""


class InjectivityViolation(GeometryError):
    """Cube too large for the injectivity radius of the manifold."""


class DimensionMismatch(QCBenchError, ValueError):
    pass


class ManifoldMismatch(QCBenchError, ValueError):
    pass


class NonFiniteValue(QCBenchError, ArithmeticError):
    pass


class OutsideCube(QCBenchError, ValueError):
    pass


class ScheduleInvalid(QCBenchError, ValueError):
    pass


class ManifoldNotFlat(QCBenchError, ValueError):
    pass


class ConfigParseError(QCBenchError, ValueError):
    pass


class UnknownIntegrand(QCBenchError, KeyError):
    pass
