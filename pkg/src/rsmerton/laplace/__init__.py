"""Transform-domain computation of the value-function factor ``g``."""

from .polynomial import Polynomial, RationalFunction, det_bareiss, det_interpolate, det_poly
from .roots import RootFindingFailure, aberth, companion_roots, find_roots
from .transform import (
    DegenerateSystem,
    ExponentialSum,
    InconsistentPoles,
    PartialFractionError,
    PoleTerm,
    TransformSystem,
    TwoStateCoefficients,
    ValueSolution,
    build_system,
    find_poles,
    invert_transform,
    partial_fractions,
    reconstruction_error,
    solve_g,
    solve_transform,
    two_state_coefficients,
    two_state_g,
)

__all__ = [
    "DegenerateSystem", "ExponentialSum", "InconsistentPoles", "PartialFractionError",
    "PoleTerm", "Polynomial", "RationalFunction", "RootFindingFailure", "TransformSystem",
    "TwoStateCoefficients", "ValueSolution", "aberth", "build_system", "companion_roots",
    "det_bareiss", "det_interpolate", "det_poly", "find_poles", "find_roots",
    "invert_transform", "partial_fractions", "reconstruction_error", "solve_g",
    "solve_transform", "two_state_coefficients", "two_state_g",
]
