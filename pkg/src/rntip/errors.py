"""Exception types raised by the tipping toolkit."""


class TippingError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TippingError, ValueError):
    """Invalid parameters or configuration."""


class NumericalError(TippingError):
    """A numerical procedure failed to produce a trustworthy answer."""


class NoBracketError(NumericalError):
    """Both ends of a bisection interval give the same outcome."""


class DegenerateError(NumericalError):
    """Eigenvalue collision or zero-spread data."""


class OffPlaneError(TippingError, ValueError):
    """A point that should lie on an invariant plane does not."""


class UnresolvedError(NumericalError):
    """Quadrature did not converge under step halving."""


class SupercriticalError(NumericalError):
    """The requested construction only exists for r <= 4/3."""


class NoIntersectionError(NumericalError):
    pass


class MultipleIntersectionsError(NumericalError):
    pass


class InsufficientSamplesError(NumericalError):
    pass


class NoEscapesError(NumericalError):
    """A Monte Carlo round produced no tipping events."""


class NotConvergedError(NumericalError):
    """The time-to-tip distribution did not converge within the round budget.

    The last computed distribution is kept on ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class IllConditionedError(NumericalError):
    pass
