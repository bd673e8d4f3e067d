"""Exception hierarchy shared by every module of the package."""


class FisherRaoError(Exception):
    """Base class for all errors raised by :mod:`fisherrao`."""


class InvalidInput(FisherRaoError, ValueError):
    """Malformed input: wrong shape, non-symmetric matrix, bad option value."""


class DomainError(FisherRaoError, ValueError):
    """A parameter lies outside the open domain of its family or chart."""


class CapabilityError(FisherRaoError, NotImplementedError):
    """The requested operation is not declared by the statistical family."""


class NumericalFailure(FisherRaoError, ArithmeticError):
    """An iterative scheme did not converge or produced non-finite values."""


class ApproximationFailure(NumericalFailure):
    """A guaranteed-approximation recursion hit its depth limit.

    The best bracket found so far is kept on the exception so callers can
    still report something useful.
    """

    def __init__(self, message, lower=None, upper=None, depth=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper
        self.depth = depth
