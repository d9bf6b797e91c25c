"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class NonConvergenceError(ArithmeticError):
    """A series or quadrature exhausted its budget before meeting tolerance."""


class DivergentPerturbation(DomainError):
    """First-order correction is an integral that diverges at r = 0."""


class RankDeficiencyError(ArithmeticError):
    """A least-squares design matrix is singular to working precision."""


class TruncationWarning(UserWarning):
    """A truncated spectral sum left a tail above the monitoring threshold."""
