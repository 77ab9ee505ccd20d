"""Exception hierarchy shared by all modules."""


class DziobekError(Exception):
    pass


class CollisionError(DziobekError, ValueError):
    """Two bodies occupy the same position (or a squared distance is nonpositive)."""


class NotRealizableError(DziobekError, ValueError):
    """Squared distances violate a triangle inequality beyond tolerance."""


class InconsistentConvexityError(DziobekError, ValueError):
    """Distances are planar but not convex in the assumed cyclic order."""


class DomainError(DziobekError, ValueError):
    pass


class NotCenteredError(DziobekError, ValueError):
    pass


class DegenerateFitError(DziobekError, ValueError):
    pass


class ConvergenceError(DziobekError, RuntimeError):
    """A Newton-type solve did not converge.

    ``iterations`` and ``residual`` describe the last accepted iterate;
    ``reason`` is a short machine-readable tag.
    """

    def __init__(self, message, *, iterations=0, residual=float("nan"), reason="max_iterations"):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.reason = reason


class OracleError(DziobekError, RuntimeError):
    pass


class PreconditionError(DziobekError, ValueError):
    pass


class NotApplicableError(DziobekError, ValueError):
    """A predicate was asked about an object outside its hypothesis."""
