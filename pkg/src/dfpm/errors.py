"""Exception hierarchy shared by the solver modules."""


class DFPMError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(DFPMError, ValueError):
    """An argument is outside the domain of the operation."""


class PreconditionError(DomainError):
    """An input violates a documented precondition (e.g. not normalized)."""


class DegenerateStateError(DFPMError):
    """A vector collapsed to zero (normalization or deflation impossible)."""


class UnsupportedOperationError(DFPMError):
    """The force field lacks a capability the operation needs."""


class IndefiniteHessianError(DFPMError):
    """The smallest Hessian eigenvalue is not positive."""


class IntegrationError(DFPMError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DivergenceError(IntegrationError):
    """The residual grew far beyond its running minimum."""


class NoConvergenceError(DFPMError):
    """An iterative method exhausted its iteration budget."""

    def __init__(self, message, iterations=None, estimate=None):
        super().__init__(message)
        self.iterations = iterations
        self.estimate = estimate
