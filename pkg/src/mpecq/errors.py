"""Exception hierarchy shared across the package."""


class MpecqError(Exception):
    """Base class for all package errors."""


class InputError(MpecqError):
    """Malformed or inconsistent user input (files, shapes, labels)."""


class InfeasiblePointError(MpecqError):
    """A point failed the feasibility residual checks it was required to pass."""


class ClassificationError(MpecqError):
    """An index could not be placed in any activity class.

    This signals a tolerance inconsistency between the point and the
    thresholds in use, not a bug in the caller.
    """


class ConvergenceError(MpecqError):
    """An iterative solve exhausted its budget.

    Carries the last residual so callers can decide whether to retry
    with a larger budget.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class WitnessVerificationError(MpecqError):
    """A solver-produced certificate failed its independent re-check.

    Raised instead of returning a bad witness; callers never need to
    trust the LP solver directly.
    """
