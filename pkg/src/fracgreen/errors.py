"""Exception hierarchy shared by all fracgreen modules."""


class FracGreenError(Exception):
    """Base class for all library-specific errors."""


class ParameterError(FracGreenError, ValueError):
    """A model or configuration parameter is outside its valid domain."""


class DomainError(FracGreenError, ValueError):
    """A function argument is outside the supported domain."""


class NumericError(FracGreenError, RuntimeError):
    """A numerical routine failed to converge or overflowed.

    Carries optional diagnostics in ``details``.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class GridMismatchError(FracGreenError, ValueError):
    """Two lattice objects do not share the same grid."""


class DivergenceError(FracGreenError, ValueError):
    """A requested quantity is a divergent series/integral (e.g. d < 3)."""


class HorizonError(NumericError):
    """A simulated path failed to cross its target level within the cap."""


class NormalizationError(NumericError):
    """A quadrature weight set failed its normalization check."""
