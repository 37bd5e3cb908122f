"""Monte Carlo engine for the lifted Heston model.

Two simulation schemes over a shared parameter and state layer: a
large-step scheme that samples integrated variance from a constrained
linear projection onto its driver, and an Euler-Maruyama baseline.
Deterministic moment curves, VIX extraction and Black-76 utilities
round out the toolkit; the ``lifted-heston`` entry point drives the
experiment harness.
"""

from .clp import ProjectionCoeffs, clp_step, constrain_beta, simulate_clp, step_coefficients
from .euler import EulerConfig, VarianceFix, euler_step, simulate_euler
from .numerics import (
    DriftMatrix,
    StepPrecompute,
    build_drift_matrix,
    e_matrix_integral,
    phi1,
    precompute_step,
    solve_psi,
    solve_xi,
)
from .params import (
    CurveKind,
    InitialCurve,
    ModelParams,
    expected_integrated_variance,
    expected_variance_curve,
    g0,
    g0_derivative,
    g0_integral,
    heston_mean_integrated_variance,
    heston_mean_variance,
    hurst_parametrization,
)
from .pricing import (
    PriceQuote,
    VixSpec,
    black76_price,
    heston_vix_squared,
    implied_vol_black,
    price_european,
    vix_from_state,
)
from .sampling import RngStream, correlated_pair, sample_inverse_gaussian, sample_standard_normal
from .state import PathSnapshot, PathState, SimDiagnostics, SimOutput, mean_se, variance_se_bootstrap

__version__ = "0.1.0"

__all__ = [
    "CurveKind",
    "DriftMatrix",
    "EulerConfig",
    "InitialCurve",
    "ModelParams",
    "PathSnapshot",
    "PathState",
    "PriceQuote",
    "ProjectionCoeffs",
    "RngStream",
    "SimDiagnostics",
    "SimOutput",
    "StepPrecompute",
    "VarianceFix",
    "VixSpec",
    "black76_price",
    "build_drift_matrix",
    "clp_step",
    "constrain_beta",
    "correlated_pair",
    "e_matrix_integral",
    "euler_step",
    "expected_integrated_variance",
    "expected_variance_curve",
    "g0",
    "g0_derivative",
    "g0_integral",
    "heston_mean_integrated_variance",
    "heston_mean_variance",
    "heston_vix_squared",
    "hurst_parametrization",
    "implied_vol_black",
    "mean_se",
    "phi1",
    "precompute_step",
    "price_european",
    "sample_inverse_gaussian",
    "sample_standard_normal",
    "simulate_clp",
    "simulate_euler",
    "solve_psi",
    "solve_xi",
    "step_coefficients",
    "variance_se_bootstrap",
    "vix_from_state",
]
