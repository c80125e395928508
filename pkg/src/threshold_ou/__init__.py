"""Simulation and generalized moment estimation for threshold OU processes."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    InvariantDensity,
    MomentVector,
    ThresholdOUParams,
    TwoRegimeParams,
    analytic_conditional_moments,
    drift,
    invariant_density,
    stationarity_check,
)
from .simulate import ObservationSeries, SeedSpec, derive_seed, simulate_path  # noqa: E402
from .stats import ConditionalMomentStats, empirical_moments, moment_ratios  # noqa: E402
from .estimators import (  # noqa: E402
    EstimationError,
    EstimationResult,
    estimate_case1,
    estimate_case2,
    estimate_case3,
)

__all__ = [
    "ThresholdOUParams", "TwoRegimeParams", "InvariantDensity", "MomentVector",
    "drift", "invariant_density", "analytic_conditional_moments", "stationarity_check",
    "ObservationSeries", "SeedSpec", "derive_seed", "simulate_path",
    "ConditionalMomentStats", "empirical_moments", "moment_ratios",
    "EstimationError", "EstimationResult", "estimate_case1", "estimate_case2", "estimate_case3",
]
