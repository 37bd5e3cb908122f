"""VIX extraction and option pricing.

The VIX at T over a horizon Theta is the annualized conditional mean of
forward integrated variance,

    VIX_T = sqrt( E[X_{T, T+Theta} | F_T] / Theta ),

which the factor representation turns into a closed affine map of U_T:
no nested simulation.  Monte Carlo prices are discounted means with
standard errors; implied volatilities invert the Black-76 formula on
the forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .numerics import build_drift_matrix, phi1, solve_xi
from .params import InitialCurve, ModelParams, g0_integral

__all__ = [
    "VixSpec",
    "PriceQuote",
    "vix_from_state",
    "heston_vix_squared",
    "price_european",
    "black76_price",
    "implied_vol_black",
]


@dataclass(frozen=True)
class VixSpec:
    """VIX experiment description: observation time, horizon, strike grid.

    ``moneyness`` multiplies the Monte Carlo forward to produce strikes.
    """

    t: float = 1.0
    horizon: float = 1.0 / 12.0
    moneyness: tuple = tuple(np.round(np.arange(0.7, 1.3001, 0.05), 4))

    def __post_init__(self):
        if self.t < 0 or self.horizon <= 0:
            raise ValueError("need t >= 0 and horizon > 0")
        if len(self.moneyness) == 0 or any(m <= 0 for m in self.moneyness):
            raise ValueError("moneyness grid must be positive")


def vix_from_state(
    u: np.ndarray,
    t: float,
    params: ModelParams,
    curve: InitialCurve,
    horizon: float = 1.0 / 12.0,
    substeps: int = 64,
) -> tuple[np.ndarray, int]:
    """VIX values from factor states at time t.

    ``u`` has shape (n_paths, N) or (N,).  The conditional mean over the
    window [t, t + horizon] is omega . (phi1(A, horizon) U + xi) + G0;
    a state outside the model's support (possible for Euler paths whose
    variance went negative) can push it below zero, in which case it is
    clamped to zero and counted in the second return value.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[1] != params.n_states:
        raise ValueError("state width does not match n_states")
    drift = build_drift_matrix(params)
    p1 = phi1(drift.matrix, horizon)
    xi = solve_xi(params, curve, t, t + horizon, substeps)
    g0_int = g0_integral(t, t + horizon, params, curve)
    cond_mean = (u @ p1.T + xi) @ params.omega + g0_int
    clamped = int(np.count_nonzero(cond_mean < 0.0))
    cond_mean = np.maximum(cond_mean, 0.0)
    return np.sqrt(cond_mean / horizon), clamped


def heston_vix_squared(v_t, lam: float, theta: float, horizon: float):
    """Classical Heston squared VIX from the spot variance.

    VIX^2 = (V_T - theta) (1 - exp(-lam Theta)) / (lam Theta) + theta,
    with the lam -> 0 limit V_T.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    v_t = np.asarray(v_t, dtype=float)
    if lam == 0.0:
        out = v_t.copy()
    else:
        weight = -math.expm1(-lam * horizon) / (lam * horizon)
        out = (v_t - theta) * weight + theta
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PriceQuote:
    """Monte Carlo option quote."""

    price: float
    std_err: float
    strike: float
    kind: str
    n_paths: int
    implied_vol: float = float("nan")


def price_european(
    samples: np.ndarray,
    strike: float,
    t: float,
    rate: float,
    kind: str = "call",
) -> PriceQuote:
    """Discounted mean payoff of a European option on the samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("no samples to price")
    if kind == "call":
        payoff = np.maximum(samples - strike, 0.0)
    elif kind == "put":
        payoff = np.maximum(strike - samples, 0.0)
    else:
        raise ValueError("kind must be 'call' or 'put'")
    disc = math.exp(-rate * t)
    n = samples.shape[0]
    price = disc * float(np.mean(payoff))
    se = disc * float(np.std(payoff, ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return PriceQuote(price=price, std_err=se, strike=strike, kind=kind, n_paths=n)


def black76_price(
    forward: float, strike: float, t: float, rate: float, vol: float, kind: str = "call"
) -> float:
    """Black-76 price of a European option on a forward."""
    if forward <= 0 or strike <= 0 or t <= 0:
        raise ValueError("forward, strike and t must be > 0")
    if vol < 0:
        raise ValueError("vol must be >= 0")
    disc = math.exp(-rate * t)
    if vol == 0.0:
        intrinsic = max(forward - strike, 0.0) if kind == "call" else max(strike - forward, 0.0)
        return disc * intrinsic
    sd = vol * math.sqrt(t)
    d1 = (math.log(forward / strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    if kind == "call":
        return disc * (forward * norm.cdf(d1) - strike * norm.cdf(d2))
    if kind == "put":
        return disc * (strike * norm.cdf(-d2) - forward * norm.cdf(-d1))
    raise ValueError("kind must be 'call' or 'put'")


def _black_vega(forward: float, strike: float, t: float, rate: float, vol: float) -> float:
    sd = vol * math.sqrt(t)
    d1 = (math.log(forward / strike) + 0.5 * sd * sd) / sd
    return math.exp(-rate * t) * forward * norm.pdf(d1) * math.sqrt(t)


def implied_vol_black(
    price: float,
    forward: float,
    strike: float,
    t: float,
    rate: float,
    kind: str = "call",
    price_tol: float = 1e-10,
    max_iter: int = 200,
) -> float:
    """Invert Black-76: the vol whose price matches to ``price_tol``.

    A price at intrinsic value returns 0.0; a price outside the
    attainable interval (below intrinsic or at/above the vol -> inf
    bound) returns NaN so callers can report a missing point rather
    than abort.  The solve is a bracketed bisection with Newton steps
    taken whenever they stay inside the bracket.
    """
    disc = math.exp(-rate * t)
    if kind == "call":
        lower, upper = disc * max(forward - strike, 0.0), disc * forward
    elif kind == "put":
        lower, upper = disc * max(strike - forward, 0.0), disc * strike
    else:
        raise ValueError("kind must be 'call' or 'put'")
    if abs(price - lower) <= price_tol:
        return 0.0
    if price < lower or price >= upper:
        return float("nan")
    lo, hi = 0.0, 1.0
    while black76_price(forward, strike, t, rate, hi, kind) < price:
        hi *= 2.0
        if hi > 1e3:
            return float("nan")
    vol = 0.5 * (lo + hi)
    for _ in range(max_iter):
        diff = black76_price(forward, strike, t, rate, vol, kind) - price
        if abs(diff) < price_tol:
            return vol
        if diff > 0.0:
            hi = vol
        else:
            lo = vol
        vega = _black_vega(forward, strike, t, rate, vol) if vol > 0 else 0.0
        if vega > 1e-14:
            newton = vol - diff / vega
            vol = newton if lo < newton < hi else 0.5 * (lo + hi)
        else:
            vol = 0.5 * (lo + hi)
    return vol
