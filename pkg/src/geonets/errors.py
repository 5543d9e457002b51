"""Exception taxonomy shared across the package."""


class GeonetsError(Exception):
    """Base class for all package errors."""


class DomainError(GeonetsError):
    """A point does not lie on the manifold within tolerance."""


class PreconditionError(GeonetsError):
    """An operation was called outside its documented domain of validity."""


class ValidationError(GeonetsError):
    """Structured input is internally inconsistent (e.g. partition vs geometry)."""


class NumericError(GeonetsError):
    """An iterative numerical procedure failed to converge."""


class StepTooLongError(GeonetsError):
    """A flow step would stretch a geodesic segment past inj/2.

    Callers are expected to shrink the step or re-run the Birkhoff
    deformation before retrying.
    """


class BirkhoffPreconditionError(PreconditionError):
    """A chain is too long for the requested number of subdivisions."""


class InvariantViolation(GeonetsError):
    """An internal invariant failed; indicates a bug or a bad tolerance."""


class ShortenDidNotConverge(NumericError):
    """The shortening loop exhausted its iteration budget.

    Carries the full trace so the caller can inspect the near-stationary
    slow manifold instead of getting a silent failure.
    """

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class ShortCycleFound(GeonetsError):
    """A contraction inside a sweepout builder hit a stationary cycle.

    This is a success for the outer min-max algorithm: the carried net is
    a direct certificate.
    """

    def __init__(self, net, message="contraction converged to a stationary 1-cycle"):
        super().__init__(message)
        self.net = net
