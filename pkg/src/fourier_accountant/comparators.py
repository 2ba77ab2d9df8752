"""Baseline accountants: RDP with the classic conversion and the GDP CLT.

Also holds the closed-form delta of a k-fold Gaussian composition, which the
tests use as an exact oracle for the FFT accountant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import log_ndtr

from .errors import BadParameter

DEFAULT_ORDERS = tuple(float(a) for a in range(2, 65)) + (128.0, 256.0)


def rdp_gaussian(order: float, sigma: float) -> float:
    """Renyi divergence of order ``order`` for the Gaussian mechanism, ``alpha / (2 sigma^2)``."""
    if not order > 1 or not sigma > 0:
        raise BadParameter("rdp_gaussian needs order > 1 and sigma > 0")
    return order / (2.0 * sigma * sigma)


def rdp_randomized_response(order: float, p: float) -> float:
    """``log(p^a (1-p)^(1-a) + (1-p)^a p^(1-a)) / (a - 1)`` for randomized response."""
    if not order > 1:
        raise BadParameter(f"order must exceed 1, got {order!r}")
    if not 0.5 <= p < 1.0:
        raise BadParameter(f"randomized response needs 1/2 <= p < 1, got {p!r}")
    lp, lq = math.log(p), math.log1p(-p)
    a = order * lp + (1.0 - order) * lq
    b = order * lq + (1.0 - order) * lp
    return max(float(np.logaddexp(a, b)) / (order - 1.0), 0.0)


@dataclass(frozen=True)
class RdpCurve:
    """Accumulated Renyi divergences ``values[i]`` at ``orders[i]``."""

    orders: tuple
    values: tuple

    def __post_init__(self):
        orders = tuple(float(a) for a in self.orders)
        values = tuple(float(v) for v in self.values)
        if not orders:
            raise BadParameter("RDP curve needs at least one order")
        if len(orders) != len(values):
            raise BadParameter("orders and values differ in length")
        if any(a <= 1 for a in orders) or any(b <= a for a, b in zip(orders, orders[1:])):
            raise BadParameter("orders must be ascending and > 1")
        if any(not v >= 0 for v in values):
            raise BadParameter("RDP values must be nonnegative")
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "values", values)

    def __add__(self, other: "RdpCurve") -> "RdpCurve":
        if self.orders != other.orders:
            raise BadParameter("cannot add RDP curves over different orders")
        return RdpCurve(self.orders, tuple(a + b for a, b in zip(self.values, other.values)))

    def scaled(self, k: int) -> "RdpCurve":
        return RdpCurve(self.orders, tuple(k * v for v in self.values))


def rdp_curve(mechanisms, orders: Sequence[float] = DEFAULT_ORDERS) -> RdpCurve | None:
    """Summed RDP of ``[(spec, count), ...]``; None if a mechanism has no RDP formula."""
    totals = np.zeros(len(orders))
    for spec, count in mechanisms:
        vals = [spec.rdp(a) for a in orders]
        if any(v is None for v in vals):
            return None
        totals += count * np.asarray(vals, dtype=float)
    return RdpCurve(tuple(orders), tuple(totals))


def rdp_to_dp(curve: RdpCurve, eps: float) -> float:
    """Classic conversion ``min_a exp(-(a - 1)(eps - gamma(a)))``, clamped to [0, 1]."""
    if not eps > 0:
        raise BadParameter(f"epsilon must be positive, got {eps!r}")
    a = np.asarray(curve.orders)
    g = np.asarray(curve.values)
    logs = -(a - 1.0) * (eps - g)
    return float(min(1.0, math.exp(min(float(logs.min()), 0.0))))


def gdp_mu_clt(q: float, sigma: float, k: int) -> float:
    """CLT parameter ``q sqrt(k (e^{1/sigma^2} - 1))`` of a subsampled Gaussian composition."""
    if not (0 <= q <= 1 and sigma > 0 and k >= 0):
        raise BadParameter("gdp_mu_clt needs 0 <= q <= 1, sigma > 0, k >= 0")
    return q * math.sqrt(k * math.expm1(1.0 / (sigma * sigma)))


def _gauss_delta(mean: float, sd: float, eps: float) -> float:
    """``E[(1 - e^{eps - s})_+]`` for ``s ~ N(mean, sd^2)`` with ``sd^2 = 2 mean``."""
    a = log_ndtr((mean - eps) / sd)
    b = eps + log_ndtr((-mean - eps) / sd)
    if b >= a:
        return 0.0
    # e^a - e^b = e^a (1 - e^{b - a})
    return float(min(1.0, max(0.0, -math.exp(a) * math.expm1(b - a))))


def gdp_to_dp(mu: float, eps: float) -> float:
    """``Phi(-eps/mu + mu/2) - e^eps Phi(-eps/mu - mu/2)``; an approximation, not a bound."""
    if not mu > 0:
        raise BadParameter(f"mu must be positive, got {mu!r}")
    # mu-GDP is the Gaussian mechanism with loss N(mu^2/2, mu^2)
    return _gauss_delta(0.5 * mu * mu, mu, float(eps))


def gaussian_analytic_delta(sigma: float, k: int, eps: float, sensitivity: float = 1.0) -> float:
    """Exact delta(eps) of ``k`` Gaussian mechanisms, loss ``N(mu_k, 2 mu_k)``."""
    if not (sigma > 0 and sensitivity > 0):
        raise BadParameter("sigma and sensitivity must be positive")
    if int(k) != k or k < 1:
        raise BadParameter(f"k must be a positive integer, got {k!r}")
    mu_k = k * sensitivity * sensitivity / (2.0 * sigma * sigma)
    return _gauss_delta(mu_k, math.sqrt(2.0 * mu_k), float(eps))


def gdp_mu(mechanisms) -> float | None:
    """Combined GDP parameter of ``[(spec, count), ...]``.

    Gaussian mechanisms contribute ``count / sigma_eff^2`` to ``mu^2`` and
    subsampled Gaussians their CLT value; other kinds give None.
    """
    total = 0.0
    for spec, count in mechanisms:
        if spec.kind == "gaussian":
            total += count / spec.sigma_eff ** 2
        elif spec.kind == "subsampled_gaussian":
            total += gdp_mu_clt(spec.q, spec.sigma, count) ** 2
        else:
            return None
    return math.sqrt(total)


def rdp_delta(mechanisms, eps: float, orders: Iterable[float] = DEFAULT_ORDERS) -> float | None:
    curve = rdp_curve(mechanisms, tuple(orders))
    return None if curve is None else rdp_to_dp(curve, eps)


def gdp_delta(mechanisms, eps: float) -> float | None:
    mu = gdp_mu(mechanisms)
    return None if mu is None or mu == 0 else gdp_to_dp(mu, eps)
