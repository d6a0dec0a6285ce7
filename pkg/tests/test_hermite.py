import math
from fractions import Fraction

import numpy as np
import pytest

from netopt.errors import DivergentSeriesError, DomainError
from netopt.hermite import (HermiteCoefficients, as_weightfunction,
                            check_series_sandwich, certified_cap,
                            gamma_integral, hermite_eval, hermite_series,
                            log_decay_coeffs, log_series_ratio,
                            log_series_value, power_mixture_ratio,
                            series_coeffs, weight_sq_s, weight_sq_w)
from netopt.weightfn import LogPowerWeight


# -- polynomials ---------------------------------------------------------------

def test_hermite_eval_examples():
    assert hermite_eval(0, 3.7) == 1.0
    assert hermite_eval(2, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert hermite_eval(3, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_hermite_eval_matches_explicit_forms():
    x = np.linspace(-3.0, 3.0, 11)
    np.testing.assert_allclose(hermite_eval(1, x), x)
    np.testing.assert_allclose(hermite_eval(2, x), (x ** 2 - 1.0) / math.sqrt(2.0),
                               rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(hermite_eval(3, x), (x ** 3 - 3.0 * x) / math.sqrt(6.0),
                               rtol=1e-13, atol=1e-13)


def test_orthonormality_by_quadrature():
    # E h_j(g) h_k(g) = delta_jk for j,k <= 12, via Gauss-Hermite nodes
    x, w = np.polynomial.hermite.hermgauss(64)
    pts = x * math.sqrt(2.0)
    wts = w / math.sqrt(math.pi)
    vals = [hermite_eval(k, pts) for k in range(13)]
    for j in range(13):
        for k in range(13):
            inner = float(np.dot(wts, vals[j] * vals[k]))
            assert inner == pytest.approx(1.0 if j == k else 0.0, abs=1e-8)


def test_hermite_series_matches_sum():
    rng = np.random.default_rng(2)
    a = rng.normal(size=9)
    x = np.linspace(-2, 2, 7)
    direct = sum(a[k] * hermite_eval(k, x) for k in range(9))
    np.testing.assert_allclose(hermite_series(a, x), direct, rtol=1e-12, atol=1e-12)


# -- coefficients ----------------------------------------------------------------

def test_log_decay_coeffs_values():
    c = log_decay_coeffs(0.75, 16)
    assert c.a[0] == 0.0 and c.a[1] == 0.0 and c.a[3] == 0.0
    assert c.a[2] == pytest.approx(1.0 / math.sqrt(2.0))
    expected_a4 = math.sqrt(2.0 / 12.0) * math.log(2.0) ** -0.75
    assert c.a[4] == pytest.approx(expected_a4, rel=1e-12)
    assert c.a[4] == pytest.approx(0.53741, abs=5e-5)


def test_coefficients_validation():
    with pytest.raises(ValueError):
        HermiteCoefficients(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        log_decay_coeffs(0.4, 10)
    with pytest.raises(ValueError):
        log_decay_coeffs(0.75, 3)


def test_coefficients_json_roundtrip():
    c = log_decay_coeffs(0.6, 12)
    again = HermiteCoefficients.from_json(c.to_json())
    np.testing.assert_array_equal(c.a, again.a)
    assert again.decay_alpha == 0.6


def test_series_identity_term_by_term():
    # coefficient of t^(k-2) in the squared weight is (k-2) log(k-2)^(-2a):
    # the rational part is an exact identity, the log factor matches floats
    alpha = 0.75
    c = log_decay_coeffs(alpha, 64)
    coeffs = series_coeffs(c, "W")
    for k in range(4, 53):
        assert Fraction(k - 2, k * (k - 1)) * (k * (k - 1)) == k - 2
        expected = (k - 2) * math.log(k - 2) ** (-2 * alpha)
        assert coeffs[k - 2] == pytest.approx(expected, rel=1e-13)
    assert coeffs[0] == pytest.approx(1.0, rel=1e-15)  # from a_2 = 1/sqrt(2)
    assert coeffs[1] == 0.0


# -- squared weights -------------------------------------------------------------

def test_weight_sq_single_term():
    a = np.zeros(4)
    a[2] = math.sqrt(2.0)
    c = HermiteCoefficients(a)
    for t in (0.0, 0.3, 0.9):
        assert weight_sq_w(c, t) == pytest.approx(4.0)


def test_weight_sq_s_single_low_term():
    a = np.zeros(3)
    a[1] = 1.0
    c = HermiteCoefficients(a)
    for t in (0.0, 0.5, 0.99):
        assert weight_sq_s(c, t) == pytest.approx(1.0)


def test_weight_sq_zero():
    c = HermiteCoefficients(np.zeros(5))
    assert weight_sq_w(c, 0.7) == 0.0
    assert weight_sq_s(c, 0.7) == 0.0


def test_weight_sq_domain():
    c = log_decay_coeffs(0.75, 16)
    with pytest.raises(DomainError):
        weight_sq_w(c, 1.0)


def test_weight_sq_tail_certification():
    c = log_decay_coeffs(0.75, 40)
    cap = certified_cap(c, "W")
    assert 0.0 < cap < 1.0
    assert weight_sq_w(c, 0.9 * cap) > 0.0
    with pytest.raises(DivergentSeriesError):
        weight_sq_w(c, min(cap * 1.05, 0.999999))
    # untagged payloads are exact truncations: no refusal anywhere
    plain = HermiteCoefficients(c.a.copy())
    assert weight_sq_w(plain, 0.999999) > 0.0


def test_certified_value_matches_infinite_series():
    alpha = 0.75
    c = log_decay_coeffs(alpha, 4000)
    for t in (0.3, 0.9, 0.99):
        finite = weight_sq_w(c, t)
        infinite = log_series_value(2 * alpha, t)
        assert finite == pytest.approx(infinite, rel=1e-9)


# -- ratio checks ---------------------------------------------------------------

def test_log_series_ratio_at_zero():
    chk = log_series_ratio(1.5, 0.0)
    assert chk.lhs == 1.0 and chk.rhs == 1.0 and chk.ratio == 1.0


def test_log_series_ratio_recorded():
    for beta in (1.2, 1.5, 2.0):
        for t in (0.5, 0.9, 0.99):
            chk = log_series_ratio(beta, t)
            assert 1e-4 <= chk.ratio <= 1e4


def test_log_series_ratio_validates():
    with pytest.raises(ValueError):
        log_series_ratio(1.0, 0.5)


def test_log_series_value_against_direct_sum():
    beta, t = 1.5, 0.6
    k = np.arange(2, 4000)
    direct = 1.0 + float(np.sum(k * np.log(k) ** -beta * t ** k))
    assert log_series_value(beta, t) == pytest.approx(direct, rel=1e-10)


def test_log_series_budget_error():
    with pytest.raises(DivergentSeriesError):
        log_series_value(1.5, 1.0 - 1e-9, max_terms=10 ** 4)


def test_power_mixture_routes_and_domain():
    chk = power_mixture_ratio(0.5, 0.5)
    assert chk.psi > 0 and chk.phi > 0
    assert chk.phi == pytest.approx(chk.phi_direct, rel=1e-6)
    with pytest.raises(DomainError):
        power_mixture_ratio(0.5, 0.0)
    with pytest.raises(ValueError):
        power_mixture_ratio(1.5, 0.5)


def test_power_mixture_gamma_limit():
    # phi * (1-t)^2 * (-log(1-t))^(beta+1) -> integral of x^beta e^-x
    for beta in (0.2, 0.5, 0.8):
        t = 1.0 - 1e-6
        chk = power_mixture_ratio(beta, t)
        limit = chk.phi * (1.0 - t) ** 2 * (-math.log1p(-t)) ** (beta + 1.0)
        assert limit == pytest.approx(gamma_integral(beta), rel=0.02)


def test_gamma_integral_matches_gamma():
    for beta in (0.2, 0.5, 1.0, 2.5):
        assert gamma_integral(beta) == pytest.approx(math.gamma(beta + 1.0), rel=1e-9)


# -- sandwich ---------------------------------------------------------------------

def test_sandwich_example_payload():
    c = log_decay_coeffs(0.75, 300)
    for r in check_series_sandwich(c, np.array([0.0, 0.5, 0.9, 0.99])):
        assert r.holds


def test_sandwich_zero_payload():
    c = HermiteCoefficients(np.zeros(5))
    r = check_series_sandwich(c, 0.5)
    assert r.holds and r.w_sq == 0.0 and r.s_sq == 0.0


def test_sandwich_randomized():
    rng = np.random.default_rng(123)
    ts = rng.uniform(0.0, 0.999, 20)
    for _ in range(200):
        a = np.zeros(11)
        a[: 11] = rng.normal(size=11) * rng.uniform(0, 3)
        reports = check_series_sandwich(HermiteCoefficients(a), ts)
        assert all(r.holds for r in reports)


# -- derived weights ----------------------------------------------------------------

def test_as_weightfunction_single_term_constant():
    a = np.zeros(4)
    a[2] = math.sqrt(2.0)
    w = as_weightfunction(HermiteCoefficients(a), "W")
    for t in (0.0, 0.4, 0.9):
        assert w.eval(t) == pytest.approx(2.0)


def test_as_weightfunction_example_properties():
    c = log_decay_coeffs(0.75, 800)
    w = as_weightfunction(c, "W")
    assert w.eval(0.0) == pytest.approx(1.0, rel=1e-12)
    ts = np.linspace(0.0, w.domain_cap, 200, endpoint=False)
    vals = w.eval(ts)
    assert np.all(np.diff(vals) >= -1e-12)


def test_derived_weight_tracks_log_power_reference():
    alpha = 0.75
    c = log_decay_coeffs(alpha, 2000)
    w = as_weightfunction(c, "W")
    ref = LogPowerWeight(alpha, 1.0)
    ts = np.linspace(0.05, min(w.domain_cap, 0.98), 24)
    ratios = w.eval(ts) / ref.eval(ts)
    assert 0.2 < ratios.min() <= ratios.max() < 5.0


def test_model_series_ratio_band():
    c = log_decay_coeffs(0.75, 500)
    ts = np.linspace(0.0, 0.99, 40)
    w_sq = weight_sq_w(c, ts, certify=False)
    s_sq = weight_sq_s(c, ts, certify=False)
    band = s_sq / w_sq
    assert 0.05 < band.min() <= band.max() < 20.0
