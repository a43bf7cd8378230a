"""Exception types shared across the package."""


class TruncationError(RuntimeError):
    """Occupation-cutoff projection dropped more weight than the policy tolerates,
    or observables failed to converge under n_max escalation."""

    def __init__(self, message, values=None):
        super().__init__(message)
        self.values = values


class ConstraintViolationError(ValueError):
    """A detector parameter constraint produced a non-physical value."""


class UndefinedStateError(RuntimeError):
    """Operation needs a normalizable conditional state (herald probability > 0)."""


class NoCoincidenceError(RuntimeError):
    """Total coincidence probability is zero; error fractions are undefined."""


class UndefinedVisibilityError(RuntimeError):
    """Max+Min of the coincidence scan is zero; visibility is undefined."""
