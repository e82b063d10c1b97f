"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionMismatchError(ValueError):
    """Operands have incompatible dimensions."""


class BudgetExceededError(ValueError):
    """A requested object would exceed the configured size budget."""


class NotCatalyticError(ValueError):
    """The channel does not restore its catalyst on the reference input."""


class PlanError(ValueError):
    """No block plan satisfies the requested window sizes.

    ``suggested_g`` holds the nearest window size for which a plan exists,
    or ``None`` if there is none.
    """

    def __init__(self, message, suggested_g=None):
        super().__init__(message)
        self.suggested_g = suggested_g


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, best_residual=float("nan"), best_state=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_state = best_state
