"""Exception hierarchy shared by all ergokit modules."""


class ErgokitError(Exception):
    """Base class for every error raised by ergokit."""


class ValidationError(ErgokitError, ValueError):
    """Inputs violate a documented precondition."""


class NotCoerciveError(ValidationError):
    """A stiffness matrix is not positive definite."""


class NumericalError(ErgokitError, RuntimeError):
    """A numerical routine failed; ``diagnostics`` carries the details."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class TrajectoryDiverged(NumericalError):
    """A time integration produced non-finite or out-of-bound values."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration limit."""


class ExpansionInvalid(NumericalError):
    """The Hessian at the saddle point is singular or indefinite."""


class QuadratureUnderresolved(NumericalError):
    """Doubling the quadrature resolution changed a result noticeably."""


class StepSizeError(NumericalError):
    """An explicit scheme was run with an unstable step size."""
