"""Exception types shared across the package."""


class SingularityError(ValueError):
    """Evaluation at a kernel or vortex singularity."""


class InvariantError(ValueError):
    """A domain-type invariant does not hold (e.g. coincident vortices)."""


class UnbalancedMeasureError(ValueError):
    """Signed measure has nonzero total mass, so transport-type norms are infinite."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class LocalizationError(RuntimeError):
    """Vortex detection found a different number of cores than expected."""

    def __init__(self, message, found=None):
        super().__init__(message)
        self.found = found if found is not None else []


class HypothesisError(RuntimeError):
    """Initial data fail the well-preparedness checks of an experiment."""
