"""Hua-type matrix integrals over SO(n), U(n), Sp(n) and their matrix balls."""
from .algebra import Algebra
from .closedform import ClosedFormValue, ExponentSpec
from .errors import (ConsistencyError, DimensionError, DomainError, GammaPoleError,
                     NumericError, SingularMatrixError)
from .matlin import GroupElement, KMatrix
from .rng import RngStream

__all__ = [
    "Algebra", "ClosedFormValue", "ExponentSpec", "ConsistencyError", "DimensionError",
    "DomainError", "GammaPoleError", "NumericError", "SingularMatrixError", "GroupElement",
    "KMatrix", "RngStream",
]
__version__ = "0.1.0"
