# module/errors.py
"""
异常模块：所有数值计算失败统一从 SpectralError 派生
"""


class SpectralError(Exception):
    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def __str__(self):
        return f'{type(self).__name__}:{self.message}'


# mobius
class NotHyperbolic(SpectralError):
    pass


class FixesInfinity(SpectralError):
    pass


# schottky
class DiskOverlap(SpectralError):
    pass


class BisectionFailure(SpectralError):
    pass


class BudgetExceeded(SpectralError):
    pass


class NoBracketing(SpectralError):
    pass


class GroupSpecError(SpectralError):
    """群描述文件格式错误，field 为出错字段"""

    def __init__(self, message, field=''):
        super().__init__(message, field=field)
        self.field = field


# zeta
class OutsideConvergence(SpectralError):
    pass


class BranchAmbiguity(SpectralError):
    pass


class NotConverged(SpectralError):
    pass


class BoundaryZero(SpectralError):
    pass


# specialfn / contour
class PoleAt(SpectralError):
    def __init__(self, message, location=None):
        super().__init__(message, location=location)
        self.location = location


class ContourThroughPole(SpectralError):
    def __init__(self, message, pole=None):
        super().__init__(message, pole=pole)
        self.pole = pole


# krein
class RouteUnavailable(SpectralError):
    pass


class QuadratureFailure(SpectralError):
    def __init__(self, message, error_estimate=None):
        super().__init__(message, error_estimate=error_estimate)
        self.error_estimate = error_estimate


class InconsistentRoutes(SpectralError):
    pass


class ZetaZero(SpectralError):
    pass


class NonIntegerWinding(SpectralError):
    pass


# renorm
class GradingMismatch(SpectralError):
    pass


class FitResidualTooLarge(SpectralError):
    pass


class WindowTooSmall(SpectralError):
    pass
