"""VIX extraction, Black-76 pricing and implied vol inversion."""

import numpy as np
import pytest

from liftedheston import (
    InitialCurve,
    ModelParams,
    VixSpec,
    black76_price,
    g0,
    heston_vix_squared,
    implied_vol_black,
    price_european,
    vix_from_state,
)


def collapse(lam=2.0, theta=0.04, v0=0.09):
    return ModelParams(1, lam, 0.2, v0, theta, -0.3, np.array([1.0]), np.array([0.0]))


def test_vix_spec_defaults_and_validation():
    spec = VixSpec()
    assert spec.t == 1.0
    assert spec.horizon == pytest.approx(1.0 / 12.0)
    assert spec.moneyness[0] == pytest.approx(0.7)
    assert spec.moneyness[-1] == pytest.approx(1.3)
    assert len(spec.moneyness) == 13
    with pytest.raises(ValueError):
        VixSpec(t=-1.0)
    with pytest.raises(ValueError):
        VixSpec(horizon=0.0)
    with pytest.raises(ValueError):
        VixSpec(moneyness=(0.9, -1.1))


def test_vix_matches_heston_closed_form():
    """On the single-factor collapse the conditional-mean map must agree
    with the classical formula for every spot variance."""
    p = collapse()
    c = InitialCurve.heston_linear()
    t, horizon = 1.0, 1.0 / 12.0
    v_t = np.array([0.01, 0.04, 0.09, 0.25])
    u = (v_t - g0(t, p, c))[:, None]
    vix, clamped = vix_from_state(u, t, p, c, horizon)
    ref = np.sqrt(heston_vix_squared(v_t, p.lam, p.theta, horizon))
    assert clamped == 0
    assert np.max(np.abs(vix - ref)) < 1e-10


def test_vix_short_horizon_limit():
    p = collapse()
    c = InitialCurve.heston_linear()
    v_t = 0.09
    u = np.array([[v_t - float(g0(1.0, p, c))]])
    for horizon in (1e-3, 1e-4):
        vix, _ = vix_from_state(u, 1.0, p, c, horizon)
        assert abs(vix[0] ** 2 - v_t) < 2.0 * p.lam * abs(p.theta - v_t) * horizon


def test_vix_lam_zero_continuity(set3, curve):
    u = np.zeros((1, 20))
    vix, clamped = vix_from_state(u, 1.0, set3, curve, 1.0 / 12.0)
    assert clamped == 0
    assert vix[0] == pytest.approx(np.sqrt(set3.v0), rel=1e-10)


def test_vix_clamps_out_of_support_states(set1, curve):
    u = np.tile(np.full(5, -10.0), (3, 1))
    vix, clamped = vix_from_state(u, 1.0, set1, curve, 1.0 / 12.0)
    assert clamped == 3
    assert np.all(vix == 0.0)
    with pytest.raises(ValueError):
        vix_from_state(np.zeros((2, 4)), 1.0, set1, curve)
    with pytest.raises(ValueError):
        vix_from_state(np.zeros((2, 5)), 1.0, set1, curve, horizon=0.0)


def test_heston_vix_squared_limits():
    assert heston_vix_squared(0.09, 0.0, 0.5, 1.0 / 12.0) == pytest.approx(0.09)
    near = heston_vix_squared(0.09, 1e-8, 0.5, 1.0 / 12.0)
    assert near == pytest.approx(0.09, rel=1e-6)
    # strong reversion pulls the index toward theta
    strong = heston_vix_squared(0.09, 200.0, 0.04, 1.0)
    assert abs(strong - 0.04) < 1e-3


def test_black76_reference_value_and_parity():
    # F = K = 100, vol 0.2, T = 1: call = F * (2 N(0.1) - 1)
    from scipy.stats import norm

    ref = 100.0 * (2.0 * norm.cdf(0.1) - 1.0)
    assert black76_price(100.0, 100.0, 1.0, 0.0, 0.2, "call") == pytest.approx(ref, abs=1e-10)
    rng = np.random.default_rng(8)
    for _ in range(20):
        f = float(rng.uniform(50, 150))
        k = float(rng.uniform(50, 150))
        t = float(rng.uniform(0.1, 3.0))
        r = float(rng.uniform(-0.01, 0.05))
        vol = float(rng.uniform(0.05, 0.8))
        call = black76_price(f, k, t, r, vol, "call")
        put = black76_price(f, k, t, r, vol, "put")
        assert call - put == pytest.approx(np.exp(-r * t) * (f - k), abs=1e-9)
    assert black76_price(100.0, 90.0, 1.0, 0.0, 0.0, "call") == pytest.approx(10.0)
    with pytest.raises(ValueError):
        black76_price(100.0, 90.0, 1.0, 0.0, 0.2, "straddle")
    with pytest.raises(ValueError):
        black76_price(-1.0, 90.0, 1.0, 0.0, 0.2)


def test_implied_vol_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(30):
        f = float(rng.uniform(0.05, 150.0))
        k = f * float(rng.uniform(0.6, 1.6))
        t = float(rng.uniform(0.1, 2.0))
        r = float(rng.uniform(0.0, 0.05))
        vol = float(rng.uniform(0.05, 1.2))
        kind = "call" if rng.random() < 0.5 else "put"
        price = black76_price(f, k, t, r, vol, kind)
        back = implied_vol_black(price, f, k, t, r, kind)
        # the solve stops on a price tolerance, so deep wings with tiny
        # vega round-trip the vol a little less tightly
        assert back == pytest.approx(vol, abs=1e-6), (f, k, t, r, vol, kind)


def test_implied_vol_degenerate_quotes():
    assert implied_vol_black(10.0, 100.0, 90.0, 1.0, 0.0, "call") == 0.0
    assert np.isnan(implied_vol_black(9.0, 100.0, 90.0, 1.0, 0.0, "call"))
    assert np.isnan(implied_vol_black(100.0, 100.0, 90.0, 1.0, 0.0, "call"))
    assert implied_vol_black(0.0, 100.0, 120.0, 1.0, 0.0, "call") == 0.0
    with pytest.raises(ValueError):
        implied_vol_black(1.0, 100.0, 100.0, 1.0, 0.0, "binary")


def test_price_european_payoffs():
    samples = np.array([80.0, 100.0, 120.0, 140.0])
    q = price_european(samples, 110.0, 2.0, 0.05, "call")
    assert q.price == pytest.approx(np.exp(-0.1) * 10.0)
    assert q.kind == "call" and q.n_paths == 4 and q.strike == 110.0
    qp = price_european(samples, 110.0, 2.0, 0.05, "put")
    assert qp.price == pytest.approx(np.exp(-0.1) * 0.25 * (30.0 + 10.0))
    assert q.std_err > 0.0
    with pytest.raises(ValueError):
        price_european(samples, 110.0, 2.0, 0.05, "digital")
    with pytest.raises(ValueError):
        price_european(np.array([]), 110.0, 2.0, 0.05)
