"""Exception types shared across the package."""


class SobexError(Exception):
    """Base class for package errors."""


class ValidationError(SobexError):
    """Input parameters or data violate a structural requirement."""


class GeometryError(SobexError):
    """A geometric feasibility condition failed for the given configuration."""


class ConvergenceError(SobexError):
    """An iterative solver exhausted its budget.

    Carries the best iterate found so far in ``best`` and the residual
    reached in ``residual``.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
