import math

import numpy as np
import pytest
from scipy.stats import norm

from fourier_accountant import FourierAccountant
from fourier_accountant.comparators import (
    DEFAULT_ORDERS,
    RdpCurve,
    gaussian_analytic_delta,
    gdp_delta,
    gdp_mu,
    gdp_mu_clt,
    gdp_to_dp,
    rdp_curve,
    rdp_delta,
    rdp_gaussian,
    rdp_randomized_response,
    rdp_to_dp,
)
from fourier_accountant.errors import BadParameter
from fourier_accountant.mechanisms import Binomial, Gaussian, RandomizedResponse, SubsampledGaussian

from .oracles import gaussian_delta_quadrature


def test_rdp_gaussian():
    assert rdp_gaussian(2, 1.0) == 1.0
    assert rdp_gaussian(2, 5.0) == pytest.approx(0.04)
    assert [rdp_gaussian(a, 3.0) for a in (2, 4, 8)] == pytest.approx([2 / 18, 4 / 18, 8 / 18])
    with pytest.raises(BadParameter):
        rdp_gaussian(1.0, 1.0)


def test_rdp_randomized_response():
    assert rdp_randomized_response(2, 0.75) == pytest.approx(math.log(0.75 ** 2 / 0.25 + 0.25 ** 2 / 0.75))
    assert rdp_randomized_response(5, 0.5) == 0.0
    for a in (1.5, 2, 10, 256):
        for p in (0.51, 0.7, 0.99):
            assert rdp_randomized_response(a, p) >= 0
    with pytest.raises(BadParameter):
        rdp_randomized_response(2, 1.0)


def test_rdp_curve_and_conversion():
    assert rdp_to_dp(RdpCurve((2.0,), (0.0,)), 1.0) == pytest.approx(math.exp(-1))
    c = rdp_curve([(Gaussian(5.0), 3), (RandomizedResponse(0.52), 2)])
    ref = [3 * a / 50 + 2 * rdp_randomized_response(a, 0.52) for a in DEFAULT_ORDERS]
    np.testing.assert_allclose(c.values, ref, rtol=1e-14)
    assert (c + c).values == pytest.approx(c.scaled(2).values)
    prev = 1.0
    for eps in np.linspace(0.1, 5, 30):
        d = rdp_to_dp(c, eps)
        assert 0 <= d <= prev
        prev = d
    assert rdp_curve([(SubsampledGaussian(0.1, 1.0), 1)]) is None
    assert rdp_delta([(Binomial(10, 0.5), 1)], 1.0) is None
    with pytest.raises(BadParameter):
        RdpCurve((2.0, 1.5), (0.0, 0.0))
    with pytest.raises(BadParameter):
        RdpCurve((2.0,), (-1.0,))
    with pytest.raises(BadParameter):
        rdp_to_dp(c, 0.0)


def test_gdp_mu():
    assert gdp_mu_clt(0.1, 1.0, 0) == 0.0
    assert gdp_mu_clt(0.02, 2.0, 500) == pytest.approx(0.02 * math.sqrt(500 * (math.exp(0.25) - 1)))
    assert gdp_mu_clt(0.02, 2.0, 400) == pytest.approx(2 * gdp_mu_clt(0.02, 2.0, 100))
    assert gdp_mu([(Gaussian(2.0), 4)]) == pytest.approx(1.0)
    assert gdp_mu([(RandomizedResponse(0.6), 1)]) is None


def test_gdp_to_dp_formula():
    for mu, eps in ((0.5, 0.3), (1.0, 1.0), (2.0, 3.0)):
        ref = norm.cdf(-eps / mu + mu / 2) - math.exp(eps) * norm.cdf(-eps / mu - mu / 2)
        assert gdp_to_dp(mu, eps) == pytest.approx(ref, rel=1e-10)
    assert gdp_to_dp(1.0, 40.0) < 1e-100
    # a Gaussian composition is exactly mu-GDP
    assert gdp_delta([(Gaussian(2.0), 4)], 1.0) == pytest.approx(gaussian_analytic_delta(2.0, 4, 1.0), rel=1e-12)
    with pytest.raises(BadParameter):
        gdp_to_dp(0.0, 1.0)


def test_analytic_gaussian_against_quadrature():
    assert gaussian_analytic_delta(1.0, 1, 0.0) == pytest.approx(gaussian_delta_quadrature(0.5, 0.0), abs=1e-10)
    for sigma, k, eps in ((2.0, 4, 1.0), (5.0, 100, 2.0), (1.0, 16, 0.5)):
        mu = k / (2 * sigma ** 2)
        assert gaussian_analytic_delta(sigma, k, eps) == pytest.approx(gaussian_delta_quadrature(mu, eps), abs=1e-10)


def test_analytic_gaussian_monotone():
    eps = np.linspace(0, 6, 50)
    vals = [gaussian_analytic_delta(2.0, 4, e) for e in eps]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    ks = [gaussian_analytic_delta(2.0, k, 1.0) for k in range(1, 40)]
    assert all(b >= a for a, b in zip(ks, ks[1:]))
    assert gaussian_analytic_delta(1.0, 1, 50.0) < 1e-200
    with pytest.raises(BadParameter):
        gaussian_analytic_delta(1.0, 0, 1.0)


@pytest.mark.parametrize("k", [1, 4, 16])
def test_fa_interval_contains_analytic(k):
    acc = FourierAccountant(20.0, 2 ** 18).fit([(Gaussian(2.0), k)])
    for eps in (0.5, 1.0, 2.0):
        b = acc.delta(eps)
        assert b.lower <= gaussian_analytic_delta(2.0, k, eps) <= b.upper


def test_rdp_above_fa_lower_bound():
    plan = [(Gaussian(5.0), 10), (RandomizedResponse(0.52), 10)]
    acc = FourierAccountant(20.0, 2 ** 16).fit(plan)
    for eps in (0.5, 1.0, 2.0, 4.0):
        assert rdp_delta(plan, eps) >= acc.delta(eps).lower
