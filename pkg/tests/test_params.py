"""Parameter layer: weight/speed construction, curves, moment oracles."""

import numpy as np
import pytest
from scipy.integrate import quad

from liftedheston import (
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


def heston_collapse(lam=2.0, theta=0.04, v0=0.09, nu=0.2, rho=-0.3):
    """Single factor with zero speed: the classical model as a special case."""
    return ModelParams(1, lam, nu, v0, theta, rho, np.array([1.0]), np.array([0.0]))


def test_hurst_parametrization_shapes_and_signs():
    for n_states, hurst in [(1, 0.1), (5, 0.3), (10, 0.1), (20, 0.3), (20, 0.49)]:
        omega, x = hurst_parametrization(n_states, hurst)
        assert omega.shape == (n_states,) and x.shape == (n_states,)
        assert np.all(omega > 0)
        assert np.all(x > 0)
        assert np.all(np.diff(x) > 0), "speeds must be strictly increasing"


def test_hurst_parametrization_reference_weight_sum():
    omega, _ = hurst_parametrization(5, 0.3)
    assert np.sum(omega) == pytest.approx(1.2008612068447684, abs=1e-13)


def test_hurst_parametrization_rejects_bad_inputs():
    with pytest.raises(ValueError):
        hurst_parametrization(0, 0.3)
    for bad in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ValueError):
            hurst_parametrization(5, bad)


def test_model_params_validation():
    ok = heston_collapse()
    assert ok.omega_bar == 1.0
    with pytest.raises(ValueError):
        ModelParams(0, 1.0, 0.2, 0.04, 0.04, 0.0, np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        ModelParams(2, 1.0, 0.2, 0.04, 0.04, 0.0, np.array([1.0]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        ModelParams(1, -0.1, 0.2, 0.04, 0.04, 0.0, np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        ModelParams(1, 1.0, 0.0, 0.04, 0.04, 0.0, np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        ModelParams(1, 1.0, 0.2, -0.04, 0.04, 0.0, np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        ModelParams(1, 1.0, 0.2, 0.04, 0.04, 1.5, np.array([1.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        ModelParams(1, 1.0, 0.2, 0.04, 0.04, 0.0, np.array([0.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        ModelParams(1, 1.0, 0.2, 0.04, 0.04, 0.0, np.array([1.0]), np.array([-1.0]))
    with pytest.raises(ValueError):
        ModelParams(1, 1.0, 0.2, 0.04, 0.04, 0.0, np.array([1.0]), np.array([0.0]), s0=0.0)


def test_lam_zero_is_admitted(set3):
    assert set3.lam == 0.0


def test_default_curve_starts_at_v0(set1, set2, set3, curve):
    for p in (set1, set2, set3):
        assert g0(p.t0, p, curve) == pytest.approx(p.v0, abs=1e-14)


def test_heston_linear_curve_values():
    p = heston_collapse(lam=2.0, theta=0.04, v0=0.09)
    c = InitialCurve.heston_linear()
    ts = np.linspace(0.0, 3.0, 7)
    assert np.allclose(g0(ts, p, c), 0.09 + 2.0 * 0.04 * ts, atol=1e-14)
    assert g0_derivative(1.3, p, c) == pytest.approx(2.0 * 0.04, abs=1e-12)


def test_lam_zero_default_curve_is_flat(set3, curve):
    ts = np.linspace(0.0, 5.0, 11)
    assert np.allclose(g0(ts, set3, curve), set3.v0, atol=1e-14)


def test_g0_integral_matches_quadrature(set1, set2, curve):
    rng = np.random.default_rng(314)
    for p in (set1, set2):
        for _ in range(5):
            s = float(rng.uniform(0.0, 3.0))
            t = s + float(rng.uniform(0.01, 2.0))
            ref = quad(lambda u: float(g0(u, p, curve)), s, t, epsabs=1e-12)[0]
            assert g0_integral(s, t, p, curve) == pytest.approx(ref, abs=1e-9)


def test_custom_curve_interpolation_and_range_check():
    p = heston_collapse(v0=0.05)
    c = InitialCurve.custom([0.0, 1.0, 2.0], [0.05, 0.07, 0.06])
    assert g0(0.5, p, c) == pytest.approx(0.06, abs=1e-14)
    assert g0_integral(0.0, 2.0, p, c) == pytest.approx(0.125, abs=1e-12)
    with pytest.raises(ValueError):
        g0(2.5, p, c)
    with pytest.raises(ValueError):
        InitialCurve.custom([0.0, 0.0], [0.05, 0.05])


def test_expected_variance_collapses_to_heston_closed_form():
    p = heston_collapse(lam=2.0, theta=0.04, v0=0.09)
    c = InitialCurve.heston_linear()
    ts = np.linspace(0.0, 2.0, 9)
    ev = expected_variance_curve(ts, p, c)
    ref = np.array([heston_mean_variance(t, 2.0, 0.04, 0.09) for t in ts])
    assert np.max(np.abs(ev - ref)) < 1e-7


def test_expected_integrated_variance_collapses_to_heston_closed_form():
    p = heston_collapse(lam=2.0, theta=0.04, v0=0.09)
    c = InitialCurve.heston_linear()
    for t in (0.5, 1.0, 5.0):
        ref = heston_mean_integrated_variance(t, 2.0, 0.04, 0.09)
        assert expected_integrated_variance(t, p, c) == pytest.approx(ref, rel=1e-7)


def test_expected_variance_lam_zero_is_constant(set3, curve):
    ts = np.linspace(0.0, 5.0, 6)
    ev = expected_variance_curve(ts, set3, curve)
    assert np.allclose(ev, set3.v0, atol=1e-10)
    assert expected_integrated_variance(5.0, set3, curve) == pytest.approx(
        5.0 * set3.v0, rel=1e-8
    )


def test_expected_variance_approaches_stationary_level(set1, set2, curve):
    """The mean variance settles toward the balance point of the kernel drift.

    The limit solves L = v0 + lam*theta*K - lam*L*K with K the integral
    of the kernel, i.e. L = (v0 + lam*theta*K) / (1 + lam*K).
    """
    for p in (set1, set2):
        k_hat = float(np.sum(p.omega / p.x))
        limit = (p.v0 + p.lam * p.theta * k_hat) / (1.0 + p.lam * k_hat)
        ts = np.linspace(10.0, 40.0, 7)
        gaps = np.abs(expected_variance_curve(ts, p, curve) - limit)
        assert np.all(np.diff(gaps) < 0), f"gaps not decreasing: {gaps}"


def test_heston_mean_variance_lam_zero_limit():
    assert heston_mean_variance(2.0, 0.0, 0.5, 0.09) == pytest.approx(0.09, abs=1e-14)
    assert heston_mean_integrated_variance(2.0, 0.0, 0.5, 0.09) == pytest.approx(
        0.18, abs=1e-14
    )
    # continuity in lam at 0
    near = heston_mean_integrated_variance(2.0, 1e-9, 0.5, 0.09)
    assert near == pytest.approx(0.18, rel=1e-6)
