import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semidiscrete.noise import RngSeed, sample_increments, standard_normals
from semidiscrete.schemes import IntegralMode, exponential_value, langevin_value
from semidiscrete.stability import (check_drift_inequality, exact_integral_variance,
                                    integral_bound, integral_bound_check, kappa1_exp_tsd, kappa1_tsd,
                                    kappa_underlying, langevin_integral, phi1_exp_tsd, phi1_tsd,
                                    phi2_exp_tsd_sample, phi2_tsd_sample)
from semidiscrete.truncation import TruncationPolicy

P = TruncationPolicy()
EXACT = IntegralMode.EXACT_GAUSSIAN

# mpmath (50 digits) reference values
PHI1_TSD_1 = -0.94999999804190406
PHI1_TSD_2 = -3.9499999918584432
K1_TSD_001 = 0.17220578457591724
PHI1_EXP_1 = -0.99999999439720356
PHI1_EXP_2 = -3.9749429533036562
K1_EXP_05 = 0.22674637769733413
PHI2_TSD_J0 = -0.049999999896942319
BOUND_1_001_04 = 0.97249839231476534


def test_kappa_underlying():
    assert kappa_underlying(0.0) == 0.0
    assert kappa_underlying(1.0) == 19.0
    assert kappa_underlying(2.0) == 304.0
    with pytest.raises(ValueError):
        kappa_underlying(-1.0)


def test_kappa1_examples():
    assert kappa1_tsd(0.0, 1.0) == 0.0
    assert kappa1_tsd(1.0, 1.0) == pytest.approx(-PHI1_TSD_1, rel=1e-14)
    assert kappa1_tsd(1.0, 0.01) == pytest.approx(K1_TSD_001, rel=1e-14)
    assert kappa1_exp_tsd(0.0, 1.0) == 0.0
    assert kappa1_exp_tsd(1.0, 1.0) == pytest.approx(-PHI1_EXP_1, rel=1e-14)
    assert kappa1_exp_tsd(0.5, 0.5) == pytest.approx(K1_EXP_05, rel=1e-14)


@given(st.floats(1e-6, 1e3), st.floats(1e-6, 1.0))
def test_kappa1_positive_off_zero(u, d):
    assert kappa1_tsd(u, d) > 0
    assert kappa1_exp_tsd(u, d) > 0
    assert kappa_underlying(u) > 0


def test_phi1_examples():
    assert phi1_tsd(0.0, 0.5, P) == 0.0
    assert phi1_tsd(1.0, 1.0, P) == pytest.approx(PHI1_TSD_1, rel=1e-14)
    assert phi1_tsd(2.0, 1.0, P) == pytest.approx(PHI1_TSD_2, rel=1e-14)
    assert phi1_exp_tsd(0.0, 0.5, P) == 0.0
    assert phi1_exp_tsd(1.0, 1.0, P) == pytest.approx(PHI1_EXP_1, rel=1e-14)
    assert P.cap(0.25) == pytest.approx(1.0334301134303119, rel=1e-14)
    assert phi1_exp_tsd(2.0, 0.25, P) == pytest.approx(PHI1_EXP_2, rel=1e-14)


@given(st.floats(-50, 50), st.floats(1e-6, 1.0))
def test_phi1_tsd_matches_direct_formula(y, d):
    c = P.clamp(d, y) ** 2
    direct = -math.expm1(-20 * c * d) * (c / 20 - y * y)
    assert phi1_tsd(y, d, P) == pytest.approx(direct, rel=1e-12, abs=1e-300)


def test_phi2_examples():
    assert phi2_tsd_sample(0.0, 0.3, P, 1.7) == 0.0
    assert phi2_tsd_sample(1.0, 1.0, P, 0.0) == pytest.approx(PHI2_TSD_J0, rel=1e-14)
    assert phi2_exp_tsd_sample(0.0, 0.3, P, 1.7) == 0.0
    assert phi2_exp_tsd_sample(1.0, 1.0, P, 1.0) == 0.0


def test_phi2_tsd_martingale_y1():
    g = standard_normals(RngSeed(1), 100_000)
    v = phi2_tsd_sample(1.0, 1.0, P, g)
    assert abs(v.mean()) < 4 * v.std(ddof=1) / math.sqrt(v.size)


def test_phi2_exp_martingale_y1():
    dw = sample_increments(RngSeed(2), 100_000, 0.01).increments()
    v = phi2_exp_tsd_sample(1.0, 0.01, P, dw)
    assert abs(v.mean()) < 4 * v.std(ddof=1) / math.sqrt(v.size)


def test_phi2_lower_endpoint_is_biased():
    # the frozen-integrand approximation loses the Ito correction
    dw = sample_increments(RngSeed(3), 100_000, 1.0).increments()
    v = phi2_tsd_sample(1.0, 1.0, P, dw, IntegralMode.LOWER_ENDPOINT)
    assert v.mean() < -0.04


def _ulps_of_largest(*terms):
    return 4 * np.spacing(np.max(np.abs(np.stack(terms)), axis=0))


@given(st.floats(-20, 20), st.floats(1e-6, 1.0), st.floats(-5, 5))
def test_exp_tsd_identity(y, d, z):
    dw = z * math.sqrt(d)
    step = exponential_value(y, dw, d, P.cap(d))
    p1 = phi1_exp_tsd(y, d, P)
    p2 = phi2_exp_tsd_sample(y, d, P, dw)
    res = step * step - y * y - p1 - p2
    assert abs(res) <= _ulps_of_largest(step * step, y * y, p1, p2)


@given(st.floats(-20, 20), st.floats(1e-6, 1.0), st.floats(-5, 5))
def test_tsd_exact_identity(y, d, g):
    c = P.clamp(d, y) ** 2
    step = langevin_value(y, 0.0, d, P.cap(d), EXACT, g)
    p1 = phi1_tsd(y, d, P)
    p2 = phi2_tsd_sample(y, d, P, g, EXACT)
    res = step * step - y * y - p1 - p2
    assert abs(res) <= 1e-8 * max(step * step, y * y, abs(p1), abs(p2), 1e-300)
    assert float(langevin_integral(c, d, g, EXACT)) * c == pytest.approx(
        step - math.exp(-10 * c * d) * y, rel=1e-9, abs=1e-14 * max(1.0, abs(y)))


def test_tsd_lower_endpoint_identity():
    # with J = e^{-10 c d} dW the same algebra covers the frozen-integrand step
    for y, d, dw in [(0.7, 0.1, 0.2), (-3.0, 0.5, -0.4), (12.0, 1.0, 1.3)]:
        step = langevin_value(y, dw, d, P.cap(d))
        res = step**2 - y**2 - phi1_tsd(y, d, P) - phi2_tsd_sample(y, d, P, dw, IntegralMode.LOWER_ENDPOINT)
        assert abs(res) < 1e-12 * max(1.0, y * y)


@pytest.mark.parametrize("scheme", ["TSD", "EXP_TSD"])
@pytest.mark.parametrize("delta", [0.01, 0.25, 0.5, 1.0])
def test_drift_inequality_default_grid(scheme, delta):
    rep = check_drift_inequality(scheme, delta, n_mc=0)
    assert rep.all_hold and rep.n_violations == 0
    assert np.all(np.isnan(rep.phi2_mc_mean))
    cap = P.cap(delta)
    assert np.any(np.isclose(rep.y, cap)) and np.any(np.isclose(rep.y, -cap))


def test_drift_inequality_examples():
    grid = np.round(np.arange(-50, 51) / 10, 10)
    assert check_drift_inequality("TSD", 1.0, grid, n_mc=0).all_hold
    rep = check_drift_inequality("EXP_TSD", 0.25, grid, n_mc=0)
    assert rep.all_hold
    inside = np.abs(grid) <= P.cap(0.25)
    np.testing.assert_array_equal(rep.phi1_values[inside], -rep.kappa1_bounds[inside])
    assert np.all(rep.phi1_values[~inside] < -rep.kappa1_bounds[~inside])
    zero = check_drift_inequality("TSD", 0.5, [0.0], n_mc=0)
    assert zero.phi1_values[0] == 0.0 and zero.kappa1_bounds[0] == 0.0 and zero.all_hold


def test_decomposition_report_rows_and_mc():
    rep = check_drift_inequality("EXP_TSD", 0.25, [0.5, 2.0], n_mc=2000, seed=1)
    rows = list(rep.rows())
    assert [r["y"] for r in rows] == [0.5, 2.0]
    assert rows[0]["neg_kappa1"] == -rep.kappa1_bounds[0]
    assert np.all(np.abs(rep.phi2_mc_mean) < 5 * rep.phi2_mc_stderr)


@pytest.mark.parametrize("scheme", ["TSD", "EXP_TSD"])
@pytest.mark.parametrize("delta", [0.01, 0.25, 0.5, 1.0])
def test_kappa1_below_kappa_on_grid(scheme, delta):
    # 1 - e^{-x} <= x gives kappa1 <= 19 u^4 delta; checked, not assumed
    rep = check_drift_inequality(scheme, delta, n_mc=0)
    assert rep.kappa1_exceeds_kappa.dtype == bool
    assert not rep.kappa1_exceeds_kappa.any()


def test_drift_inequality_rejects():
    with pytest.raises(ValueError):
        check_drift_inequality("LSD", 0.5)
    with pytest.raises(ValueError):
        check_drift_inequality("TSD", 1.5)


def test_integral_bound_examples():
    rep0 = integral_bound_check(0.0, 0.1, 0.25, n_samples=1000)
    assert rep0.empirical_prob == 0.0 and rep0.within_bound
    rep = integral_bound_check(1.0, 0.01, 0.4)
    assert rep.theoretical_bound == pytest.approx(BOUND_1_001_04, rel=1e-14)
    assert rep.within_bound
    assert integral_bound(1.0, 0.01, 0.1) < integral_bound(1.0, 0.01, 0.25) < integral_bound(1.0, 0.01, 0.4)


def test_integral_oracle_variance():
    c, d = 1.0, 0.1
    rep_samples = 20_000
    h = d / 256
    dw = sample_increments(RngSeed(6), rep_samples * 256, h).increments().reshape(rep_samples, 256)
    D = dw @ np.expm1(10 * c * h * np.arange(256))
    assert D.var() == pytest.approx(exact_integral_variance(c, d), rel=0.05)
    assert exact_integral_variance(0.0, d) == 0.0


@pytest.mark.parametrize("kwargs", [dict(r=0.5), dict(c=-1.0), dict(delta=0.0), dict(n_substeps=32), dict(n_samples=0)])
def test_integral_bound_rejects(kwargs):
    args = dict(c=1.0, delta=0.1, r=0.25, n_samples=10, n_substeps=64)
    args.update(kwargs)
    with pytest.raises(ValueError):
        integral_bound_check(**args)
