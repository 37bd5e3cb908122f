"""Integrated-variance-implicit scheme by constrained linear projection.

One step [t_i, t_{i+1}] works on the integrated variance X = int V du
and its driver integral Z = int sqrt(V) dW2 instead of V itself:

  1. from the factor state U_i compute the conditional mean
     alpha_i = E_i[X] and the linear-projection slope
     beta_i = E_i[X Z] / alpha_i of the surrogate X ~ alpha + beta Z;
  2. clip beta_i into the set for which the implied variance update
     stays nonnegative for every realization (a one-sided interval with
     an explicit closed-form boundary), giving beta^C;
  3. sample X_hat from the inverse Gaussian IG(alpha, (alpha/beta^C)^2)
     -- the first-passage law consistent with the surrogate -- and read
     the driver back out as Z_hat = (X_hat - alpha) / beta^C;
  4. split X_hat across factors along the conditional-covariance
     direction, update U, V, the log price and the running integrals.

The price update uses X_hat for its quadratic variation, so the
discounted price stays a martingale exactly (the inverse Gaussian
moment generating function cancels the drift correction in closed
form).  Variance nonnegativity is enforced pathwise by step 2 rather
than by truncation, which is what keeps large steps honest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import StepPrecompute, build_drift_matrix, precompute_step
from .params import InitialCurve, ModelParams, g0
from .sampling import RngStream, sample_inverse_gaussian
from .state import PathSnapshot, PathState, SimDiagnostics, SimOutput

__all__ = [
    "ProjectionCoeffs",
    "step_coefficients",
    "constrain_beta",
    "clp_step",
    "simulate_clp",
]

_V_ROUNDOFF = 1e-12


@dataclass
class ProjectionCoeffs:
    """Per-path projection coefficients for one step.

    ``alpha`` is E_i[X], ``alpha_factors`` the per-factor means E_i[X^n],
    ``beta`` the raw projection slope E_i[X Z] / alpha, ``ratio`` the
    factor split E_i[X^n Z] / E_i[X Z].  ``beta_limit`` is the largest
    admissible slope (+inf when the slope constraint never binds),
    ``c`` the constant such that the variance constraint at X_hat = 0
    reads c - nu * alpha * omega_bar / beta >= 0, and ``beta_c`` the
    constrained slope actually used for sampling.
    """

    alpha: np.ndarray
    alpha_factors: np.ndarray
    beta: np.ndarray
    ratio: np.ndarray
    degenerate: np.ndarray
    beta_limit: np.ndarray | None = None
    c: np.ndarray | None = None
    beta_c: np.ndarray | None = None
    constrained: np.ndarray | None = None


def step_coefficients(
    state: PathState, pre: StepPrecompute, params: ModelParams
) -> ProjectionCoeffs:
    """Unconstrained projection coefficients from the current state.

    alpha estimates the conditional mean of a positive integral; the
    affine surrogate that produces it has no support constraint, so over
    very large steps a path in the far tail can land at alpha <= 0 even
    though its variance is nonnegative.  Such paths are flagged as
    degenerate; the step for them collapses to the alpha -> 0+ limit
    (X_hat = 0, Z_hat = 0, handled in :func:`clp_step`).  A nonpositive
    E_i[X Z] is representable: beta then routes the path to the
    constrained branch and the factor split falls back to its small-step
    limit ratio_n = 1/omega_bar, which preserves the identity
    sum_n omega_n ratio_n = 1.
    """
    omega = params.omega
    alpha_factors = state.u @ pre.phi1.T + pre.xi
    alpha = alpha_factors @ omega + pre.g0_int
    degenerate = alpha <= 0.0
    kappa = state.u @ pre.chi.T + pre.psi
    xz_mean = kappa @ omega
    beta = xz_mean / np.where(degenerate, 1.0, alpha)
    ok = xz_mean > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(ok[:, None], kappa / xz_mean[:, None], 1.0 / params.omega_bar)
    return ProjectionCoeffs(
        alpha=alpha,
        alpha_factors=alpha_factors,
        beta=beta,
        ratio=ratio,
        degenerate=degenerate,
    )


def constrain_beta(
    coeffs: ProjectionCoeffs,
    state: PathState,
    pre: StepPrecompute,
    params: ModelParams,
) -> ProjectionCoeffs:
    """Clip the projection slope so the variance update stays nonnegative.

    The variance after the step is affine in the sampled X_hat >= 0, so
    nonnegativity holds iff the slope in X_hat is nonnegative --
    beta <= beta_limit = nu * omega_bar / sum_n omega_n (x_n ratio_n + lam)
    (no bound when that denominator is nonpositive) -- and the value at
    X_hat = 0 is nonnegative, c - nu alpha omega_bar / beta >= 0.  A raw
    beta that is nonpositive or infeasible is replaced by the boundary
    slope beta^C = nu alpha omega_bar / c, which satisfies both
    conditions with the X_hat = 0 value exactly zero.
    """
    omega, x = params.omega, params.x
    omega_bar = params.omega_bar
    nu = params.nu
    wx = omega * x
    denom = coeffs.ratio @ wx + params.lam * omega_bar
    with np.errstate(divide="ignore"):
        beta_limit = np.where(denom > 0.0, nu * omega_bar / np.where(denom > 0.0, denom, 1.0), np.inf)
    xhat_at_zero = coeffs.alpha_factors - coeffs.ratio * coeffs.alpha[:, None]
    c = state.u @ omega - xhat_at_zero @ wx + pre.g0_next
    bad_c = (c <= 0.0) & ~coeffs.degenerate
    if np.any(bad_c):
        bad = int(np.argmax(bad_c))
        raise FloatingPointError(
            f"constraint constant nonpositive (path {bad}, c={c[bad]:.3e}); "
            f"no admissible slope exists"
        )
    # degenerate paths never sample, so give them a harmless positive slope
    alpha_pos = np.where(coeffs.degenerate, 1.0, coeffs.alpha)
    boundary = nu * alpha_pos * omega_bar / c
    with np.errstate(divide="ignore", invalid="ignore"):
        value_at_zero = c - nu * alpha_pos * omega_bar / coeffs.beta
    feasible = (
        (coeffs.beta > 0.0)
        & (coeffs.beta <= beta_limit)
        & (value_at_zero >= 0.0)
        & ~coeffs.degenerate
    )
    beta_c = np.where(feasible, coeffs.beta, boundary)
    return ProjectionCoeffs(
        alpha=coeffs.alpha,
        alpha_factors=coeffs.alpha_factors,
        beta=coeffs.beta,
        ratio=coeffs.ratio,
        degenerate=coeffs.degenerate,
        beta_limit=beta_limit,
        c=c,
        beta_c=beta_c,
        constrained=~feasible & ~coeffs.degenerate,
    )


def clp_step(
    state: PathState,
    pre: StepPrecompute,
    params: ModelParams,
    stream: RngStream,
    diagnostics: SimDiagnostics | None = None,
) -> PathState:
    """Advance all paths by one step.

    Per step each path consumes three draws in fixed order: the normal
    and uniform behind the inverse Gaussian, then the price normal.
    Degenerate paths (conditional mean at or below zero) burn the same
    draws but take the deterministic limit step: X_hat = 0 with the
    X_hat = 0 factor split (the affine identity stays exact), a pure
    discounting price increment (the discounted price stays a martingale
    exactly), and the smallest driver value that keeps the variance
    nonnegative, Z_hat = max(-c, 0) / (nu omega_bar), which is 0
    whenever the constraint constant c is positive.
    """
    coeffs = constrain_beta(step_coefficients(state, pre, params), state, pre, params)
    alpha, beta_c, ratio = coeffs.alpha, coeffs.beta_c, coeffs.ratio
    degen = coeffs.degenerate
    n = state.n_paths
    alpha_pos = np.where(degen, 1.0, alpha)
    gamma = np.square(alpha_pos / beta_c)
    x_hat = sample_inverse_gaussian(stream, alpha_pos, gamma, size=n)
    x_hat = np.where(degen, 0.0, x_hat)
    z_hat = np.where(degen, 0.0, (x_hat - alpha_pos) / beta_c)
    z_state = np.where(
        degen, np.maximum(-coeffs.c, 0.0) / (params.nu * params.omega_bar), z_hat
    )
    incr = x_hat - alpha
    x_hat_factors = coeffs.alpha_factors + ratio * incr[:, None]
    u_new = (
        state.u
        - x_hat_factors * params.x[None, :]
        - (params.lam * x_hat)[:, None]
        + (params.nu * z_state)[:, None]
    )
    v_raw = u_new @ params.omega + pre.g0_next
    negative = v_raw < 0.0
    n_clamped = 0
    if np.any(negative):
        worst = float(np.min(v_raw))
        if worst < -_V_ROUNDOFF:
            raise FloatingPointError(
                f"variance {worst:.3e} below the roundoff floor -{_V_ROUNDOFF:.0e}; "
                f"constraint violated"
            )
        n_clamped = int(np.count_nonzero(negative))
        v_new = np.where(negative, 0.0, v_raw)
    else:
        v_new = v_raw
    z_price = stream.normal(n)
    rho = params.rho
    log_s_new = (
        state.log_s
        + params.rate * pre.dt
        - 0.5 * x_hat
        + rho * z_hat
        + np.sqrt((1.0 - rho * rho) * x_hat) * z_price
    )
    if diagnostics is not None:
        live = ~degen
        diagnostics.total_draws += n
        diagnostics.constrained_draws += int(np.count_nonzero(coeffs.constrained))
        diagnostics.degenerate_mean_draws += int(np.count_nonzero(degen))
        diagnostics.min_variance = min(diagnostics.min_variance, float(np.min(v_new)))
        diagnostics.min_beta = min(
            diagnostics.min_beta, float(np.min(beta_c, initial=np.inf, where=live))
        )
        with np.errstate(invalid="ignore"):
            over = np.max(
                beta_c / coeffs.beta_limit - 1.0,
                initial=-np.inf,
                where=np.isfinite(coeffs.beta_limit) & live,
            )
        diagnostics.max_beta_over_limit = max(diagnostics.max_beta_over_limit, float(over))
        value_at_zero = coeffs.c - params.nu * alpha_pos * params.omega_bar / beta_c
        diagnostics.min_constraint_at_zero = min(
            diagnostics.min_constraint_at_zero,
            float(np.min(value_at_zero, initial=np.inf, where=live)),
        )
        diagnostics.clamped_variance_values += n_clamped
    return PathState(
        t=pre.t_end,
        log_s=log_s_new,
        u=u_new,
        v=v_new,
        x_cum=state.x_cum + x_hat,
        z_cum=state.z_cum + z_state,
    )


def _check_curve(params: ModelParams, curve: InitialCurve) -> None:
    v_at_t0 = float(g0(params.t0, params, curve))
    if abs(v_at_t0 - params.v0) > 1e-10:
        raise ValueError(
            f"initial curve value {v_at_t0:.6g} at t0 does not match v0={params.v0:.6g}"
        )


def _check_grid(grid: np.ndarray, params: ModelParams, allow_late_start: bool = False) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be one-dimensional with at least two times")
    if allow_late_start:
        if grid[0] < params.t0 - 1e-12:
            raise ValueError("grid must not start before t0")
    elif abs(grid[0] - params.t0) > 1e-12:
        raise ValueError("grid must start at t0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


def simulate_clp(
    params: ModelParams,
    curve: InitialCurve,
    grid,
    n_paths: int,
    seed: int | RngStream,
    snapshot_times=(),
    record_step_means: bool = False,
    substeps: int = 64,
    initial: PathState | None = None,
) -> SimOutput:
    """Simulate all paths over the grid with the projection scheme.

    ``seed`` may be an integer (wrapped as stream_id 0) or a ready
    :class:`RngStream`.  ``snapshot_times`` must be grid points; the full
    batch state is copied there, e.g. to price forward-starting payoffs.
    ``initial`` restarts from an interior state instead of (U=0, v0);
    its time must equal grid[0].
    """
    grid = _check_grid(grid, params, allow_late_start=initial is not None)
    _check_curve(params, curve)
    stream = seed if isinstance(seed, RngStream) else RngStream(int(seed))
    if initial is None:
        state = PathState.initial(params, n_paths)
    else:
        if abs(initial.t - grid[0]) > 1e-12:
            raise ValueError("initial state time must equal grid[0]")
        if initial.n_paths != n_paths:
            raise ValueError("initial state does not hold n_paths paths")
        state = initial.copy()
    drift = build_drift_matrix(params)
    diagnostics = SimDiagnostics(scheme="clp", n_paths=n_paths, n_steps=grid.size - 1)
    snapshot_times = [float(t) for t in snapshot_times]
    for t_snap in snapshot_times:
        if not np.any(np.abs(grid - t_snap) <= 1e-12):
            raise ValueError(f"snapshot time {t_snap} is not a grid point")
    snapshots: dict[float, PathSnapshot] = {}
    mean_v = np.empty(grid.size) if record_step_means else None
    mean_x = np.empty(grid.size) if record_step_means else None
    if record_step_means:
        mean_v[0] = float(np.mean(state.v))
        mean_x[0] = 0.0

    def _maybe_snapshot(st: PathState):
        for t_snap in snapshot_times:
            if abs(st.t - t_snap) <= 1e-12:
                snapshots[t_snap] = PathSnapshot(
                    st.t, st.log_s.copy(), st.u.copy(), st.v.copy(), st.x_cum.copy(), st.z_cum.copy()
                )

    _maybe_snapshot(state)
    matrix_cache: dict[float, tuple] = {}
    for i in range(grid.size - 1):
        dt = float(grid[i + 1] - grid[i])
        parts = matrix_cache.get(dt)
        pre = precompute_step(
            params, curve, float(grid[i]), float(grid[i + 1]), substeps, drift, parts
        )
        if parts is None:
            matrix_cache[dt] = (pre.exp_a_dt, pre.phi1, pre.e_matrix, pre.chi)
        state = clp_step(state, pre, params, stream, diagnostics)
        _maybe_snapshot(state)
        if record_step_means:
            mean_v[i + 1] = float(np.mean(state.v))
            mean_x[i + 1] = float(np.mean(state.x_cum))
    return SimOutput(
        times=grid,
        s=np.exp(state.log_s),
        v=state.v,
        x=state.x_cum,
        z=state.z_cum,
        diagnostics=diagnostics,
        snapshots=snapshots,
        step_mean_v=mean_v,
        step_mean_x=mean_x,
    )
