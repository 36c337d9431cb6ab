"""Exceptions and warnings shared across coniso."""


class ConisoError(Exception):
    """Base class for coniso failures."""


class HypothesisViolation(ConisoError):
    """A geometric hypothesis required by a construction does not hold."""


class NonConvergence(ConisoError):
    """Newton iteration did not reach tolerance; ``history`` holds residuals."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class EigensolverError(ConisoError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ConsistencyError(ConisoError):
    """Numerical output contradicts a known geometric inequality; the discretization is suspect."""


class GraphRegularityError(ConisoError):
    """Radial graph leaves the annulus or loses its induced metric."""


class HypothesisWarning(UserWarning):
    """Input accepted although it violates the curvature/area hypotheses."""
