"""Exception hierarchy shared by all modules."""


class KnockoffError(Exception):
    """Base class for errors raised by this package."""


class NotPositiveDefinite(KnockoffError):
    pass


class DowndateBreaksPD(NotPositiveDefinite):
    pass


class ConvergenceFailure(KnockoffError):
    pass


class DegenerateCovariance(KnockoffError):
    pass


class DegenerateData(KnockoffError):
    pass


class StepInfeasible(KnockoffError):
    """A coordinate step left the feasible interval. Indicates a solver bug."""


class NoRootInInterval(KnockoffError):
    pass


class NoFeasibleGamma(KnockoffError):
    pass


class InfeasibleS(KnockoffError):
    pass


class InsufficientRows(KnockoffError):
    pass


class RankDeficientX(KnockoffError):
    pass


class RankDeficient(KnockoffError):
    pass


class InvalidParams(KnockoffError, ValueError):
    pass


class InvalidKind(KnockoffError, ValueError):
    pass


class ConfigError(KnockoffError, ValueError):
    pass


class IndexOutOfRange(KnockoffError, IndexError):
    pass
