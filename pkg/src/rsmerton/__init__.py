"""Exact CRRA value functions and optimal strategies in regime-switching markets."""

from .laplace import ExponentialSum, ValueSolution, solve_g
from .model import (
    GeneratorMatrix,
    MarketModel,
    ModelValidationError,
    RegimeScalars,
    regime_scalars,
    validate_model,
)
from .oracles import PathEstimate, matexp_g, mc_g, ode_g, simulate_chain
from .portfolio import (
    expected_utility_mc,
    hjb_residual,
    merton_factor,
    optimal_fraction,
    simulate_optimal_wealth,
    solve_value,
    value,
)

__version__ = "0.1.0"

__all__ = [
    "ExponentialSum", "GeneratorMatrix", "MarketModel", "ModelValidationError",
    "PathEstimate", "RegimeScalars", "ValueSolution", "expected_utility_mc",
    "hjb_residual", "matexp_g", "mc_g", "merton_factor", "ode_g", "optimal_fraction",
    "regime_scalars", "simulate_chain", "simulate_optimal_wealth", "solve_g",
    "solve_value", "validate_model", "value",
]
