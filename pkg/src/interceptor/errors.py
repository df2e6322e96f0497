"""Exception types raised by the planning pipeline."""


class InterceptorError(Exception):
    """Base class for all library errors."""


class DomainError(InterceptorError):
    """Invalid argument (non-finite input, bad degree, bad bounds)."""


class SingularFitError(InterceptorError):
    """Polynomial fit is rank deficient (repeated or near-repeated times)."""


class StartBlockedError(InterceptorError):
    """Path search start pose is in collision."""


class GoalBlockedError(InterceptorError):
    """Path search goal pose is in collision."""


class NoPathError(InterceptorError):
    """Path search exhausted the open set without reaching the goal."""


class DegenerateSegmentError(InterceptorError):
    """Two consecutive path points coincide; smoothing terms are undefined."""


class NoFeasibleProfileError(InterceptorError):
    """Speed DP could not reach the terminal station within the horizon."""


class EmptyCorridorError(InterceptorError):
    """No linear corridor bounds separate the reference profile from obstacles."""

    def __init__(self, segment: int, message: str = ""):
        self.segment = segment
        super().__init__(message or f"no feasible corridor in segment {segment}")


class QPInfeasibleError(InterceptorError):
    """QP constraints admit no solution (divergence certificate tripped)."""

    def __init__(self, message: str = "", segment: int | None = None):
        self.segment = segment
        super().__init__(message or "quadratic program is infeasible")


class QPMaxIterationsError(InterceptorError):
    """QP solver hit the iteration cap before reaching the residual tolerance."""

    def __init__(self, x, residual: float):
        self.best_x = x
        self.residual = residual
        super().__init__(f"QP solver hit iteration cap (residual {residual:.3e})")


class ScenarioError(InterceptorError):
    """Scenario file failed to parse or validate."""
