"""Exception hierarchy."""


class KFLError(Exception):
    """Base class for all errors raised by kfl."""


class UnboundedPolytope(KFLError):
    pass


class NotDelzant(KFLError):
    pass


class DegeneratePolytope(KFLError):
    pass


class GridMismatch(KFLError):
    pass


class GridTooCoarse(KFLError):
    pass


class NonConvexInput(KFLError):
    pass


class ParameterOutOfRange(KFLError):
    pass


class DegenerateHessian(KFLError):
    pass


class NotFano(KFLError):
    pass


class EdgeDimensionUnsupported(KFLError):
    pass


class NonConvergence(KFLError):
    pass


class SolverFailure(KFLError):
    pass


class RouteDisagreement(KFLError):
    pass


class UnsortedTimestamps(KFLError):
    pass


class InsufficientSpread(KFLError):
    pass


class MissingCapability(KFLError):
    pass


class PreconditionNotMet(KFLError):
    pass
