"""Exception types shared across the package.

Parse errors reuse the built-in SyntaxError so callers get position
information through the standard ``offset`` attribute.
"""


class UrnlabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(UrnlabError):
    """Expression evaluates to a non-positive or non-finite weight."""


class ToleranceUnreachable(UrnlabError):
    """A guaranteed error bound cannot be pushed below the requested
    tolerance within the iteration budget."""


class OutOfRange(UrnlabError):
    """Requested inverse value lies at or beyond the total mass of the
    time transform (explosive feedback)."""


class NotDifferentiable(UrnlabError):
    """Finite-difference probes of a custom expression are non-finite."""


class NotExplosive(UrnlabError):
    """Operation requires a feedback with summable reciprocals."""


class InfeasibleN(UrnlabError):
    """Initial market size too small for the number of agents."""


class RadiusExceeded(UrnlabError):
    """Evaluation point outside the convergence radius of a series."""


class AssumptionViolated(UrnlabError):
    """A stated precondition of an analytic formula does not hold."""


class LimitUndefined(UrnlabError):
    """The limiting vector field has no value at the requested point."""


class StepFailure(UrnlabError):
    """Integrator step too coarse near the simplex boundary."""


class UnknownExperiment(UrnlabError):
    """Experiment name not present in the registry."""
