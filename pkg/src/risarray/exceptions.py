"""Exception types raised by the simulator."""


class RisArrayError(Exception):
    """Base class for all errors raised by :mod:`risarray`."""


class ConfigError(RisArrayError, ValueError):
    """Invalid scenario configuration."""


class NonPositiveSpacing(RisArrayError, ValueError):
    """The directional-array spacing formula produced ``d_A <= 0``."""


class DimensionMismatch(RisArrayError, ValueError):
    pass


class DegenerateChannel(RisArrayError, ValueError):
    """All eigenvalues of the composite Gram matrix are zero."""


class RankDeficient(RisArrayError, ValueError):
    pass


class SingularCovariance(RisArrayError, ArithmeticError):
    pass


class ZeroEstimate(RisArrayError, ValueError):
    """A precoder cannot be normalized because the estimated channel is zero."""


class IllPosed(RisArrayError, ValueError):
    pass


class Infeasible(RisArrayError, ValueError):
    """The lower end of the bisection bracket is not feasible."""


class DropError(RisArrayError):
    """Wraps an error raised while simulating a single drop."""

    def __init__(self, drop: int, cause: Exception):
        super().__init__(f"drop {drop}: {type(cause).__name__}: {cause}")
        self.drop = drop
        self.cause = cause
