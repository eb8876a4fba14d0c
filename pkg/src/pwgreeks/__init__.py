"""Monte Carlo Delta and Gamma by first-step path weighting.

Typical use::

    from pwgreeks import build_grid, flat_model, EuropeanCall, RunConfig, adjusted_pw

    grid = build_grid([1.0], step=7 / 360, insert_first=1 / 360)
    spec = flat_model([1.0], [0.2], [[1.0]], grid)
    est = adjusted_pw(spec, EuropeanCall(1.0), RunConfig(n_paths=100_000))
"""

from .correlation import CorrelationModel, InflationParams, eps2_rule, factor, inflate, uniform_correlation
from .dynamics import FirstStep, ModelSpec, PathTriple, flat_model, inflated_first_step, simulate, simulate_triple, step
from .errors import ConfigError, InvalidInputError, NotACorrelationError, NumericalError, SingularCorrelationError
from .estimators import (
    KINDS,
    GreeksEstimate,
    RunConfig,
    adjusted_pw,
    default_inflation,
    estimate,
    fd_greeks,
    path_weighting,
    pwci,
    raw_pw,
)
from .grid import SimulationGrid, build_grid
from .market import LocalVolSurface, c_functions
from .payoffs import Autocallable, Constant, EuropeanCall, Linear, Smoothing, european_call, performance
from .rng import NoiseBlock, first_step_variants, generate_block, normal
from .weights import WeightSet, delta_weights, diagonal_kernel, gamma_weights, generic_weights

__all__ = [
    "Autocallable", "ConfigError", "Constant", "CorrelationModel", "EuropeanCall", "FirstStep",
    "GreeksEstimate", "InflationParams", "InvalidInputError", "KINDS", "Linear", "LocalVolSurface",
    "ModelSpec", "NoiseBlock", "NotACorrelationError", "NumericalError", "PathTriple", "RunConfig",
    "SimulationGrid", "SingularCorrelationError", "Smoothing", "WeightSet", "adjusted_pw",
    "build_grid", "c_functions", "default_inflation", "delta_weights", "diagonal_kernel",
    "eps2_rule", "estimate", "european_call", "factor", "fd_greeks", "first_step_variants",
    "flat_model", "gamma_weights", "generate_block", "generic_weights", "inflate",
    "inflated_first_step", "normal", "path_weighting", "performance", "pwci", "raw_pw",
    "simulate", "simulate_triple", "step", "uniform_correlation",
]

__version__ = "0.1.0"
