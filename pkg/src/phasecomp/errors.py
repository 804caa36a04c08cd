"""Exception hierarchy shared by the simulation modules."""


class PhasecompError(Exception):
    """Base class for all errors raised by this package."""


class InvalidModelError(PhasecompError, ValueError):
    """A model or configuration value violates its invariants."""


class DomainError(PhasecompError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(PhasecompError, RuntimeError):
    """A numerical routine failed to reach its requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class DegenerateDataError(PhasecompError, ValueError):
    """Measured data carry no information (for example all counts zero)."""


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap.

    ``best`` holds the best iterate found so far.
    """

    def __init__(self, message, best=None, achieved=None):
        super().__init__(message, achieved=achieved)
        self.best = best
