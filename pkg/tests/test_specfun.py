import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, special

from ncplane.errors import DomainError
from ncplane.specfun import (digamma, gamma_tricomi_u_array, gauss_2f1,
                             gauss_2f1_near_unity, kummer_m, kummer_m_array,
                             kummer_m_integral, kummer_m_poly, ln_gamma,
                             pochhammer, tricomi_u)


# --- gamma family ----------------------------------------------------------

@pytest.mark.parametrize("x, expected", [(1.0, 0.0), (5.0, math.log(24.0)),
                                         (0.5, 0.5 * math.log(math.pi))])
def test_ln_gamma_examples(x, expected):
    assert abs(ln_gamma(x) - expected) <= 1e-13


def test_ln_gamma_against_mpmath():
    for x in np.geomspace(1e-3, 1e3, 37):
        assert abs(ln_gamma(x) - float(mpmath.loggamma(x))) <= 1e-13 * max(1, abs(ln_gamma(x)))


@pytest.mark.parametrize("bad", [0.0, -1.0, -2.5])
def test_gamma_family_domain(bad):
    with pytest.raises(DomainError):
        ln_gamma(bad)
    with pytest.raises(DomainError):
        digamma(bad)


def test_digamma_euler_constant_from_harmonic_oracle():
    # γ = Σ_k (1/k - log((k+1)/k)); the tail beyond K is 1/(2K) - 5/(12K²) + O(K⁻³)
    K = 200000
    k = np.arange(1, K + 1, dtype=float)
    gamma_e = np.sum(1.0 / k - np.log1p(1.0 / k)) + 1.0 / (2 * K) - 5.0 / (12 * K * K)
    assert abs(digamma(1.0) + gamma_e) <= 1e-12


def test_digamma_recurrence():
    assert abs(digamma(2.0) - (digamma(1.0) + 1.0)) <= 1e-12
    expected = digamma(1.0) + sum(1.0 / k for k in range(1, 10))
    assert abs(digamma(10.0) - expected) <= 1e-12


def test_pochhammer():
    assert pochhammer(7.3, 0) == 1.0
    assert pochhammer(-4.0, 0) == 1.0
    assert pochhammer(3, 4) == 360
    assert pochhammer(-2, 4) == 0
    assert_allclose(pochhammer(0.5, 6), math.gamma(6.5) / math.gamma(0.5), rtol=1e-14)


# --- Kummer M --------------------------------------------------------------

def test_kummer_m_trivial_cases():
    assert kummer_m(1.7, 2.2, 0.0).value == 1.0
    assert kummer_m(0.0, 2.2, 5.0).value == 1.0
    r = kummer_m(-1, 2, 3.0)
    assert r.converged and r.terms_used == 2
    assert r.value == 1 - 3.0 / 2


@pytest.mark.parametrize("a, b, z", [(0.3, 1.7, 5.0), (2.5, 1.5, 12.0), (0.5, 3.0, -25.0),
                                     (1.5, 2.0, -3.0), (4.0, 4.5, 30.0)])
def test_kummer_m_against_scipy(a, b, z):
    r = kummer_m(a, b, z)
    assert r.converged
    assert_allclose(r.value, special.hyp1f1(a, b, z), rtol=1e-12)
    assert abs(r.value - float(mpmath.hyp1f1(a, b, z))) <= r.err_estimate + 1e-15 * abs(r.value)


def test_kummer_m_polynomial_matches_horner():
    for n in range(0, 9):
        for b in (0.5, 1.0, 3.0):
            for z in (-2.0, 0.7, 4.0):
                coeffs = [1.0]
                for k in range(n):
                    coeffs.append(coeffs[-1] * (-n + k) / ((b + k) * (k + 1)))
                horner = 0.0
                for c in reversed(coeffs):
                    horner = horner * z + c
                # machine precision relative to the size of the terms
                scale = sum(abs(c) * abs(z) ** j for j, c in enumerate(coeffs))
                r = kummer_m(-n, b, z)
                assert r.converged and r.terms_used == n + 1
                assert abs(r.value - horner) <= 1e-14 * scale
                assert abs(kummer_m_poly(n, b, z) - horner) <= 1e-13 * scale


def test_kummer_m_nonpositive_b_domain():
    with pytest.raises(DomainError):
        kummer_m(0.5, -2.0, 1.0)
    # terminating before the pole is allowed
    assert kummer_m(-1, -2.0, 1.0).value == 1 + 0.5


def test_kummer_m_nonconvergence_is_flagged():
    r = kummer_m(1.5, 1.0, 500.0, max_terms=50)
    assert not r.converged
    assert r.terms_used <= 50


def test_kummer_recurrence_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        a, b = rng.uniform(0.5, 5.0, 2)
        z = rng.uniform(-10, 10)
        m0, m1, m2 = (kummer_m(x, b, z).value for x in (a - 1, a, a + 1))
        terms = [(b - a) * m0, (2 * a - b + z) * m1, -a * m2]
        assert abs(sum(terms)) <= 1e-9 * max(map(abs, terms))


def test_kummer_array_and_integral_agree():
    z = np.linspace(0, 60, 25)
    vals, ok = kummer_m_array(0.5, 2.0, z)
    assert ok.all()
    assert_allclose(vals, special.hyp1f1(0.5, 2.0, z), rtol=1e-13)
    for zz in (0.0, 3.0, 40.0):
        r = kummer_m_integral(0.5, 2.0, zz)
        assert_allclose(r.value, special.hyp1f1(0.5, 2.0, zz), rtol=1e-11)


def test_kummer_integral_domain():
    with pytest.raises(DomainError):
        kummer_m_integral(2.0, 1.5, 1.0)


# --- Tricomi U -------------------------------------------------------------

def test_tricomi_u_exponential_integral_oracle():
    # U(1,1,z) = e^z E1(z); E1 by direct quadrature of e^{-t}/t on [1, ∞)
    e1, _ = integrate.quad(lambda t: math.exp(-t) / t, 1.0, np.inf, epsabs=1e-15)
    r = tricomi_u(1.0, 1.0, 1.0)
    assert r.converged
    assert_allclose(r.value, math.e * e1, rtol=1e-12)
    assert_allclose(r.value, 0.596347362323194, rtol=1e-12)


def test_tricomi_u_large_z():
    for a, b in [(0.5, 1.0), (1.5, 3.0), (2.0, 0.5)]:
        r = tricomi_u(a, b, 100.0)
        assert abs(r.value * 100.0 ** a - 1) < 0.05


@pytest.mark.parametrize("a, b, z", [(0.5, 1.0, 1e-3), (0.5, 2.0, 0.01), (3.5, 4.0, 50.0),
                                     (0.5, 4.0, 2.0), (2.2, 1.2, 7.0), (1.0, 5.0, 0.3)])
def test_tricomi_u_against_mpmath(a, b, z):
    r = tricomi_u(a, b, z)
    exact = float(mpmath.hyperu(a, b, z))
    assert r.converged
    assert_allclose(r.value, exact, rtol=1e-11)


def test_tricomi_u_domain():
    with pytest.raises(DomainError):
        tricomi_u(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        tricomi_u(1.0, 1.0, 0.0)


def test_gamma_tricomi_array():
    z = np.geomspace(1e-4, 80, 30)
    for a, b in [(0.5, 1.0), (0.5, 3.0), (2.5, 3.0)]:
        got = gamma_tricomi_u_array(a, b, z) / math.gamma(a)
        want = np.array([float(mpmath.hyperu(a, b, x)) for x in z])
        assert_allclose(got, want, rtol=1e-11)


# --- Gauss 2F1 -------------------------------------------------------------

def test_gauss_2f1_examples():
    assert gauss_2f1(0.3, 0.4, 0.5, 0.0).value == 1.0
    r = gauss_2f1(1, 0.5, 1.5, 0.25)
    assert_allclose(r.value, math.atanh(0.5) / 0.5, rtol=1e-12)
    assert_allclose(r.value, 1.0986122886681098, rtol=1e-12)
    b, c, z = 0.7, 1.9, 0.4
    poly = 1 - 2 * b * z / c + b * (b + 1) * z * z / (c * (c + 1))
    assert_allclose(gauss_2f1(-2, b, c, z).value, poly, rtol=1e-15)


def test_atanh_series_oracle():
    # atanh(x) = Σ x^(2k+1)/(2k+1)
    x = 0.5
    s = sum(x ** (2 * k + 1) / (2 * k + 1) for k in range(200))
    assert_allclose(gauss_2f1(1, 0.5, 1.5, x * x, tol=1e-15).value, s / x, rtol=1e-14)


def test_gauss_2f1_domain_and_budget():
    with pytest.raises(DomainError):
        gauss_2f1(0.5, 0.5, 1.0, 1.0)
    with pytest.raises(DomainError):
        gauss_2f1(0.5, 0.5, -1.0, 0.3)
    r = gauss_2f1(2, 1.5, 2.5, 0.999, max_terms=200)
    assert not r.converged
    assert r.terms_used <= 200


def test_gauss_2f1_terminating_accepts_large_argument():
    r = gauss_2f1(-3, -2, 2.0, -80.0)
    expected = 1 + (-3) * (-2) * (-80.0) / 2.0 + (-3) * (-2) * (-2) * (-1) * 6400.0 / (2 * 3 * 2)
    assert_allclose(r.value, expected, rtol=1e-14)


# --- expansion about unit argument ------------------------------------------

def _direct_oracle(L, c, z):
    # extended-budget direct summation in extended precision
    with mpmath.workdps(40):
        return float(mpmath.nsum(lambda k: mpmath.rf(1 + L, k) * mpmath.rf(c, k)
                                 / (mpmath.rf(1 + c, k) * mpmath.factorial(k)) * mpmath.mpf(z) ** k,
                                 [0, mpmath.inf]))


@pytest.mark.parametrize("L, c, eps", [(1, 1.0, 0.2), (2, 1.5, 0.3), (1, 0.5, 0.2),
                                       (2, 2.5, 0.3), (3, 0.5, 0.01)])
def test_near_unity_against_direct_series(L, c, eps):
    r = gauss_2f1_near_unity(L, c, eps, n_terms=200)
    assert r.converged
    assert abs(r.value - _direct_oracle(L, c, 1 - eps)) <= 1e-8 * abs(r.value)


def test_near_unity_small_argument_limit():
    # ε^k decays like 0.999^k, so the default budget is honestly reported as short
    for L in (1, 2):
        r = gauss_2f1_near_unity(L, 0.5, 0.999)
        assert abs(r.value - special.hyp2f1(1 + L, 0.5, 1.5, 0.001)) <= r.err_estimate
        assert not r.converged
    assert abs(gauss_2f1_near_unity(1, 0.5, 0.999).value - 1.0) < 1e-3
    r = gauss_2f1_near_unity(2, 1.5, 0.999)
    assert abs(r.value - 1.0) < 5e-3
    # the expansion tracks the function itself, 1 + (3·1.5/2.5)(1e-3) + ...
    assert abs(r.value - special.hyp2f1(3, 1.5, 2.5, 0.001)) < 1e-3


def test_near_unity_domain():
    with pytest.raises(DomainError):
        gauss_2f1_near_unity(0, 0.5, 0.2)
    with pytest.raises(DomainError):
        gauss_2f1_near_unity(1, 0.5, 1.2)
    with pytest.raises(DomainError):
        gauss_2f1_near_unity(1, -0.5, 0.2)


def test_near_unity_and_direct_agree_within_estimates():
    for L, c in [(1, 0.5), (1, 1.5), (2, 0.5), (2, 2.5), (3, 3.5)]:
        for z in (0.55, 0.7, 0.85, 0.94):
            d = gauss_2f1(1 + L, c, 1 + c, z)
            e = gauss_2f1_near_unity(L, c, 1 - z)
            assert d.converged and e.converged
            assert abs(d.value - e.value) <= d.err_estimate + e.err_estimate


# --- error estimates ---------------------------------------------------------

@settings(max_examples=150, deadline=None)
@given(a=st.floats(0.1, 4.0), b=st.floats(0.2, 4.0), c=st.floats(0.5, 5.0), z=st.floats(-0.9, 0.9))
def test_err_estimate_bounds_refined_value(a, b, c, z):
    r = gauss_2f1(a, b, c, z, tol=1e-8)
    fine = gauss_2f1(a, b, c, z, tol=1e-15, max_terms=20000)
    if r.converged:
        assert r.err_estimate <= 1e-8 * max(1.0, abs(r.value))
        assert abs(fine.value - r.value) <= r.err_estimate + 4e-16 * abs(fine.value)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.1, 4.0), b=st.floats(0.2, 4.0), z=st.floats(0.0, 30.0))
def test_kummer_err_estimate_bounds_refined_value(a, b, z):
    r = kummer_m(a, b, z, tol=1e-8)
    fine = kummer_m(a, b, z, tol=1e-15, max_terms=20000)
    assert r.converged
    assert abs(fine.value - r.value) <= r.err_estimate + 4e-16 * abs(fine.value)
