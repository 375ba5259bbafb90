import numpy as np
import pytest

from mfsir.rng import derive_stream
from mfsir.stats import (cov_with_ci, fit_power_law, ks_two_sample,
                         normality_screen)


def test_fit_exact_minus_half():
    ns = np.array([100, 400, 1600, 6400])
    fit = fit_power_law(ns, 3.0 * ns**-0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-10)
    assert fit.slope_se == pytest.approx(0.0, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_exact_minus_third():
    ns = np.array([250, 1000, 4000])
    fit = fit_power_law(ns, 0.7 * ns**(-1 / 3))
    assert fit.slope == pytest.approx(-1 / 3, abs=1e-10)


def test_fit_scale_invariance():
    ns = np.array([50, 100, 200, 400, 800])
    y = 2.0 * ns**-0.47 * np.exp(np.sin(ns))  # arbitrary positive data
    a = fit_power_law(ns, y)
    b = fit_power_law(ns, 13.7 * y)
    assert a.slope == pytest.approx(b.slope, abs=1e-12)
    assert a.slope_se == pytest.approx(b.slope_se, abs=1e-12)


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_power_law([10, 20], [1.0, 0.5])
    with pytest.raises(ValueError):
        fit_power_law([10, 20, 40], [1.0, -0.5, 0.2])


def test_ks_identical_samples():
    x = np.linspace(-2, 2, 100)
    v = ks_two_sample(x, x)
    assert v.statistic == pytest.approx(0.0, abs=1e-12)
    assert v.p_value == pytest.approx(1.0, abs=1e-9)


def test_ks_shifted_normals():
    rng = derive_stream(0, "ks", 0)
    a = rng.standard_normal(500)
    b = rng.standard_normal(500) + 3.0
    v = ks_two_sample(a, b)
    assert v.p_value < 1e-6
    assert v.rejects(0.01)


def test_ks_calibration():
    rng = derive_stream(1, "ks", 0)
    rejections = 0
    for _ in range(200):
        a = rng.standard_normal(500)
        b = rng.standard_normal(500)
        if ks_two_sample(a, b).rejects(0.05):
            rejections += 1
    assert 0.01 * 200 <= rejections + 1  # not degenerate zero test
    assert 0.01 <= rejections / 200 + 0.005 and rejections / 200 <= 0.10


def test_ks_monotone_invariance():
    rng = derive_stream(2, "ks", 0)
    a = rng.standard_normal(300)
    b = rng.standard_normal(300) * 1.4
    v1 = ks_two_sample(a, b)
    v2 = ks_two_sample(np.exp(a), np.exp(b))
    assert v1.statistic == pytest.approx(v2.statistic, abs=1e-12)


def test_ks_small_sample_rejected():
    with pytest.raises(ValueError):
        ks_two_sample(np.zeros(10), np.ones(40))


def test_normality_screen_quantile_grid():
    from scipy.stats import norm

    x = norm.ppf((np.arange(2000) + 0.5) / 2000)
    v = normality_screen(x)
    assert v.statistic < 0.01
    assert v.extras["approximate"] is True


def test_normality_screen_exponential_skew():
    rng = derive_stream(3, "ns", 0)
    x = rng.exponential(1.0, 1000)
    v = normality_screen(x)
    assert v.extras["skew_z"] > 5


def test_normality_screen_uniform_kurtosis():
    rng = derive_stream(4, "ns", 0)
    x = rng.random(1000)
    v = normality_screen(x)
    assert v.extras["kurtosis_z"] < -5


def test_normality_screen_zero_variance():
    with pytest.raises(ValueError):
        normality_screen(np.ones(200))


def test_cov_ci_contains_variance():
    rng = derive_stream(5, "cov", 0)
    u = rng.standard_normal(400)
    est = cov_with_ci(u, u, rng=derive_stream(5, "boot", 0))
    assert est.ci_low <= est.value <= est.ci_high
    assert est.value == pytest.approx(np.var(u), rel=0.02)


def test_cov_ci_independent_calibration():
    hits = 0
    for k in range(50):
        rng = derive_stream(6, "cov", k)
        u = rng.standard_normal(300)
        v = rng.standard_normal(300)
        est = cov_with_ci(u, v, n_boot=500, rng=derive_stream(6, "boot", k))
        if est.ci_low <= 0.0 <= est.ci_high:
            hits += 1
    assert hits >= 45  # >= 90 percent coverage


def test_cov_ci_linearity():
    rng = derive_stream(7, "cov", 0)
    u = rng.standard_normal(500)
    est = cov_with_ci(u, 2 * u, rng=derive_stream(7, "boot", 0))
    assert est.ci_low <= 2 * np.var(u) <= est.ci_high * 1.05


def test_cov_ci_deterministic():
    rng = derive_stream(8, "cov", 0)
    u = rng.standard_normal(200)
    v = rng.standard_normal(200)
    a = cov_with_ci(u, v, rng=derive_stream(8, "boot", 0))
    b = cov_with_ci(u, v, rng=derive_stream(8, "boot", 0))
    assert (a.value, a.ci_low, a.ci_high) == (b.value, b.ci_low, b.ci_high)
