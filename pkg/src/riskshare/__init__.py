"""Comonotone Pareto-optimal risk sharing with coherent distortion risk measures."""

from .allocation import (
    InfeasibleError,
    LayerStructure,
    RetentionProfile,
    VerificationReport,
    build_retentions,
    layer_structure,
    retention_risks,
    side_payments,
    verify,
)
from .choquet import Retention, choquet_integral, coherent_risk, risk_of_retention
from .config import ConfigError, MarketConfig, load_config, parse_config
from .distortion import (
    DistortionSet,
    ExpectedShortfall,
    Identity,
    Mixture,
    PiecewiseLinear,
    PowerTail,
    WangTransform,
    concavity_check,
    mix,
)
from .distribution import Discrete, Empirical, Gamma, Lognormal, Uniform
from .estimator import ComonotoneRiskSharing
from .oracle import brute_force_layer_allocations, brute_force_minmax, layer_minimum
from .pipeline import MarketResult, solve_market
from .quadrature import QuadratureConfig, QuadratureError
from .solver import MinMaxProblem, MinMaxSolution, SolverOptions, objective, solve

__version__ = "0.1.0"

__all__ = [
    "ComonotoneRiskSharing",
    "ConfigError",
    "Discrete",
    "DistortionSet",
    "Empirical",
    "ExpectedShortfall",
    "Gamma",
    "Identity",
    "InfeasibleError",
    "LayerStructure",
    "Lognormal",
    "MarketConfig",
    "MarketResult",
    "MinMaxProblem",
    "MinMaxSolution",
    "Mixture",
    "PiecewiseLinear",
    "PowerTail",
    "QuadratureConfig",
    "QuadratureError",
    "Retention",
    "RetentionProfile",
    "SolverOptions",
    "Uniform",
    "VerificationReport",
    "WangTransform",
    "brute_force_layer_allocations",
    "brute_force_minmax",
    "build_retentions",
    "choquet_integral",
    "coherent_risk",
    "concavity_check",
    "layer_minimum",
    "layer_structure",
    "load_config",
    "mix",
    "objective",
    "parse_config",
    "retention_risks",
    "risk_of_retention",
    "side_payments",
    "solve",
    "solve_market",
    "verify",
]
