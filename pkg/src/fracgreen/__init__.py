"""Numerics for Markov dynamics run on inverse-subordinator clocks.

Subpackages cover the kernel catalog of subordinator families, special
functions for the stable case, Laplace transform and inversion utilities,
path samplers, lattice jump dynamics, and the time-changed evolution with
its renormalized long-time averages.
"""

from .errors import (
    DivergenceError,
    DomainError,
    FracGreenError,
    GridMismatchError,
    HorizonError,
    NormalizationError,
    NumericError,
    ParameterError,
)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "DomainError",
    "FracGreenError",
    "GridMismatchError",
    "HorizonError",
    "NormalizationError",
    "NumericError",
    "ParameterError",
    "__version__",
]
