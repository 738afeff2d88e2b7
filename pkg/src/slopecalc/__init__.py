"""Slope functions as a calculus: constructions, rules, diagnostics and a CLI."""

from .duality import DualityFunctional, dual_functional
from .errors import (
    CoincidentPointsError,
    ContractionError,
    ConvergenceError,
    DimensionError,
    DomainError,
    NonFiniteError,
    SingularOperatorError,
    SlopeCalcError,
)
from .slope import (
    Box,
    DiffFunction,
    SlopeOp,
    basis_slope,
    basis_slope_op,
    canonical_slope,
    derivative_oracle,
    satisfies_slope_identity,
)
from .vecspace import EUCLIDEAN, BilinearMap, Euclidean, InnerProduct, PNorm, norm, op_norm

__version__ = "0.1.0"

__all__ = [
    "BilinearMap", "Box", "CoincidentPointsError", "ContractionError", "ConvergenceError",
    "DiffFunction", "DimensionError", "DomainError", "DualityFunctional", "EUCLIDEAN", "Euclidean",
    "InnerProduct", "NonFiniteError", "PNorm", "SingularOperatorError", "SlopeCalcError", "SlopeOp",
    "basis_slope", "basis_slope_op", "canonical_slope", "derivative_oracle", "dual_functional",
    "norm", "op_norm", "satisfies_slope_identity",
]
