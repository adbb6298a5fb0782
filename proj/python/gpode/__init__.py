"""Probabilistic ODE solver and Riemannian statistics.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from ._core import (  # noqa: F401
    ContractViolation,
    CurveBelief,
    DegenerateGeodesic,
    IllConditionedModel,
    LocalMetric,
    MetricField,
    OptimizationFailed,
    OracleFailure,
    ParseError,
    RhsEvaluationError,
    TangentStatistic,
    exp_map,
    fit_local_metrics,
    k_d2lambda2,
    k_dlambda2,
    k_eval,
    karcher_mean,
    log_map,
    pga,
    rk4_ivp,
    shooting_bvp,
    solve_bvp,
    solve_ivp,
)

__all__ = [
    "ContractViolation",
    "CurveBelief",
    "DegenerateGeodesic",
    "IllConditionedModel",
    "LocalMetric",
    "MetricField",
    "OptimizationFailed",
    "OracleFailure",
    "ParseError",
    "RhsEvaluationError",
    "TangentStatistic",
    "exp_map",
    "fit_local_metrics",
    "k_d2lambda2",
    "k_dlambda2",
    "k_eval",
    "karcher_mean",
    "log_map",
    "pga",
    "rk4_ivp",
    "shooting_bvp",
    "solve_bvp",
    "solve_ivp",
]

__version__ = "0.1.0"
