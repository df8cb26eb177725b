"""Exception types raised by the solver and its frontends."""


class OssqpError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(OssqpError, ValueError):
    pass


class BadDims(OssqpError, ValueError):
    pass


class RankDeficient(OssqpError):
    pass


class NotPSD(OssqpError):
    pass


class NonInterior(OssqpError):
    pass


class NotFeasible(OssqpError):
    pass


class NotInNeighborhood(OssqpError):
    pass


class SingularM(OssqpError):
    pass


class ZeroResidual(OssqpError):
    """The centering residual vanished; there is nothing to solve."""


class MaxInnerIters(OssqpError):
    pass


class CenteringStalled(OssqpError):
    pass


class EmptyTrace(OssqpError):
    pass


class ParseError(OssqpError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelError(OssqpError):
    pass


class BadC(OssqpError, ValueError):
    pass


class RegularizationRequired(OssqpError):
    pass


class LayoutMismatch(OssqpError):
    pass


class BoundViolated(OssqpError):
    pass
