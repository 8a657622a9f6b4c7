"""Exception hierarchy shared by all modules."""


class MerolocError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(MerolocError, ValueError):
    """An argument violates a documented precondition."""


class ConvergenceError(MerolocError):
    """An iterative solver failed to converge; carries whatever diagnostics exist."""

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


class DegenerateSystemError(MerolocError):
    """A linear system is degenerate (e.g. duplicate interpolation nodes)."""


class EvaluationOverflowError(MerolocError):
    """A function evaluation overflowed or returned a non-finite value."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class EvaluationError(MerolocError):
    """An external evaluator failed (child exit, protocol violation, timeout)."""


class BoundaryProximityError(MerolocError):
    """A zero or pole appears to lie on or too near the integration contour."""

    def __init__(self, message, rect=None):
        super().__init__(message)
        self.rect = rect


class ToleranceNotMetError(MerolocError):
    """Adaptive quadrature ran out of budget; carries the error it did achieve."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class InconsistentTraceError(MerolocError):
    """The total argument change around a closed contour is not near an integer."""


class DegeneratePencilError(MerolocError):
    """The Hankel pencil produced fewer finite eigenvalues than roots expected."""


class MultiplicityInconsistencyError(MerolocError):
    """Recovered weights do not round to integers consistent with the winding."""


class BranchCutError(MerolocError):
    """A point maps onto or across the slot of the annulus (logarithm branch cut)."""


class BoundaryRootError(MerolocError):
    """Jitter retries exhausted: a root sits on the region boundary."""

    def __init__(self, message, rect=None):
        super().__init__(message)
        self.rect = rect


class PartialResultError(MerolocError):
    """Search finished with unresolved subregions; carries partial reports."""

    def __init__(self, message, reports=(), unresolved=(), diagnostics=None):
        super().__init__(message)
        self.reports = list(reports)
        self.unresolved = list(unresolved)
        self.diagnostics = diagnostics


class JobValidationError(MerolocError, ValueError):
    """A CLI job document failed schema or semantic validation."""
