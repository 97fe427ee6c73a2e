"""Exception types shared across the library."""


class DeSitterError(Exception):
    """Base class for every library-specific error."""


class ChartSingularity(DeSitterError):
    """The point sits on the coordinate sphere sigma^2 = 4 ell^2 where the
    conformal factor diverges and the chart degenerates."""


class NorthPole(DeSitterError):
    """Bulk point has X4 = ell; chart coordinates are undefined there."""


class NotOnBrane(DeSitterError):
    """Bulk point violates the pseudo-sphere constraint beyond tolerance."""


class ConstraintViolated(DeSitterError):
    """Bulk state drifted off the pseudo-sphere or lost tangency."""


class NoConvergence(DeSitterError):
    """Shooting iteration failed to converge from every initial guess."""


class InsufficientSamples(DeSitterError):
    """Too few trajectory samples for a finite-difference estimate."""


class DegenerateFit(DeSitterError):
    """Least-squares slope fit is impossible (zero errors or < 2 points)."""


class ScenarioError(DeSitterError):
    """Scenario file missing, malformed, or inconsistent."""
