"""Exception types shared by every module."""


class PreconditionError(ValueError):
    """Inputs violate a stated assumption; carries an optional witness density."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class EvaluationError(PreconditionError):
    """A field returned a non-finite value."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (blow-up, no convergence, instability)."""
