"""A-priori error bounds for the FFT accountant and grid parameter selection.

Every bound here is valid for any positive lambda, so callers minimise over a
finite candidate list. All exponentials are formed in the log domain.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import log_ndtr

from .errors import BadParameter, Degenerate, HypothesisViolated, Infeasible
from .grid_pld import DiscretePld, RawPld, Sign, log_mgf, pld_from_distributions, _next_pow2

LAMBDA_ENV = "FA_LAMBDA_CANDIDATES"
DEFAULT_LAMBDA_FACTORS = (0.5, 1.0, 2.0, 3.0, 4.0)
ABSOLUTE_LAMBDAS = tuple(2.0 ** j for j in range(-4, 7))
DEFAULT_N_CAP = 1 << 27


def _safe_exp(x: float) -> float:
    if x > 709.0:
        return math.inf
    return math.exp(x)


@dataclass(frozen=True)
class LambdaCandidates:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(sorted({float(v) for v in self.values}))
        if not vals:
            raise BadParameter("lambda candidate list is empty")
        if vals[0] <= 0 or not all(math.isfinite(v) for v in vals):
            raise BadParameter("lambda candidates must be positive and finite")
        object.__setattr__(self, "values", vals)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    @classmethod
    def scaled(cls, L: float, factors: Sequence[float] = DEFAULT_LAMBDA_FACTORS) -> "LambdaCandidates":
        """``{0.5L, L, 2L, 3L, 4L}`` by default."""
        return cls(tuple(f * L for f in factors))

    @classmethod
    def from_env(cls) -> "LambdaCandidates | None":
        raw = os.environ.get(LAMBDA_ENV, "").strip()
        if not raw:
            return None
        try:
            return cls(tuple(float(tok) for tok in raw.split(",") if tok.strip()))
        except ValueError as exc:
            raise BadParameter(f"{LAMBDA_ENV} must be a comma-separated list of numbers: {exc}") from None

    @classmethod
    def default(cls, L: float | None = None) -> "LambdaCandidates":
        """Environment override, else the L-scaled list joined with a fixed ladder."""
        env = cls.from_env()
        if env is not None:
            return env
        vals = list(ABSOLUTE_LAMBDAS)
        if L is not None:
            vals += [f * L for f in DEFAULT_LAMBDA_FACTORS]
        return cls(tuple(vals))


@dataclass(frozen=True)
class ErrorBudget:
    periodisation: float = 0.0
    truncation: float = 0.0
    discretisation: float = 0.0
    fft_clamp_slack: float = 0.0
    lambda_used: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("periodisation", "truncation", "discretisation", "fft_clamp_slack"):
            v = float(getattr(self, name))
            if not v >= 0:
                raise BadParameter(f"budget component {name} must be nonnegative, got {v}")
            object.__setattr__(self, name, v)

    def total(self) -> float:
        return self.periodisation + self.truncation + self.discretisation + self.fft_clamp_slack


def _entries(plds) -> list[tuple[RawPld | DiscretePld, int]]:
    out = []
    for item in plds:
        if isinstance(item, tuple):
            out.append((item[0], int(item[1])))
        else:
            out.append((item, 1))
    return out


def total_log_mgf(plds, lam: float, sign: Sign = Sign.PLUS) -> float:
    """``sum_j k_j * alpha_j(lambda)`` over ``pld`` or ``(pld, k)`` items."""
    return math.fsum(k * log_mgf(p, lam, sign) for p, k in _entries(plds))


def chernoff_tail(plds, t: float, lam: float) -> float:
    """Upper bound ``exp(sum alpha_i(lambda) - lambda t)`` on ``P[sum omega_i >= t]``."""
    if not lam > 0:
        raise BadParameter(f"lambda must be positive, got {lam!r}")
    return _safe_exp(total_log_mgf(plds, lam, Sign.PLUS) - lam * t)


def periodisation_bound(alpha_plus: float, alpha_minus: float, L: float, lam: float, tilt: float = 0.0) -> float:
    """``(e^a+ + e^a-) e^{-L lam} / (1 - e^{-2 L lam})``.

    With a tilt ``t`` the upper tail wraps back with weight up to
    ``e^{2 L t}``, so its term becomes
    ``e^{a+ - L lam + 2 L t} / (1 - e^{-2 L (lam - t)})`` and needs
    ``lam > t``. The lower tail term is unchanged.
    """
    if not (lam > 0 and L > 0):
        raise BadParameter("periodisation bound needs lambda > 0 and L > 0")
    if tilt < 0:
        raise BadParameter(f"tilt must be nonnegative, got {tilt!r}")
    if lam <= tilt:
        return math.inf
    denom_p = -math.expm1(-2.0 * L * (lam - tilt))
    denom_m = -math.expm1(-2.0 * L * lam)
    if denom_p < 1e-300:
        raise Degenerate(f"L*lambda = {L * lam:.3e} is too small for the periodisation bound")
    logs = [alpha_plus - L * lam + 2.0 * L * tilt - math.log(denom_p),
            alpha_minus - L * lam - math.log(denom_m)]
    hi, lo = max(logs), min(logs)
    if math.isinf(hi):
        return math.inf if hi > 0 else 0.0
    return _safe_exp(hi + math.log1p(math.exp(lo - hi)))


def _log_geometric(a: float, k: int) -> float:
    """``log sum_{l=1}^{k-1} e^{l a}`` for ``k >= 2``."""
    m = k - 1
    if math.isinf(a):
        return a
    if abs(a) < 1e-12:
        return math.log(m) + a * (m + 1) / 2.0
    if a > 0:
        # e^a (e^{m a} - 1) / (e^a - 1)
        return a + m * a + math.log(-math.expm1(-m * a)) - (a + math.log(-math.expm1(-a)))
    return a + math.log(-math.expm1(m * a)) - math.log(-math.expm1(a))


def truncation_bound(max_alpha_plus: float, max_alpha_minus: float, k: int, L: float, lam: float,
                     tilt: float = 0.0) -> float:
    """Extra error when single-mechanism support reaches outside ``[-L, L]``.

    ``sum over +/- of (e^{k a} - e^{a}) / (e^{a} - 1) * e^{-L lam}``, with the
    ``a -> 0`` value ``k - 1``. A tilt ``t`` scales the upper term by
    ``e^{2 L t}`` and needs ``lam > t``, as for the periodisation bound.
    """
    if not lam > 0:
        raise BadParameter(f"lambda must be positive, got {lam!r}")
    k = int(k)
    if k < 1:
        raise BadParameter(f"k must be a positive integer, got {k}")
    if k == 1:
        return 0.0
    if lam <= tilt:
        return math.inf
    up = _log_geometric(max_alpha_plus, k) + 2.0 * L * tilt
    down = _log_geometric(max_alpha_minus, k)
    return _safe_exp(up - L * lam) + _safe_exp(down - L * lam)


def discretisation_bound(
    plds, dx: float, k_total: int, eps: float, lambdas: Iterable[float], refine: bool = True
) -> float:
    """``min(k dx, min_lambda k dx e^{sum alpha(lambda) - lambda eps})``.

    The exponent is convex in lambda, so with ``refine`` the candidate minimum
    is polished by a bounded scalar search over the candidate range, widened
    upwards while the exponent keeps decreasing. Any
    positive lambda gives a valid bound, so refinement only tightens it.
    """
    if not dx > 0:
        raise BadParameter(f"dx must be positive, got {dx!r}")
    cap = k_total * dx
    cands = LambdaCandidates(tuple(lambdas)).values

    def expo(lam):
        return total_log_mgf(plds, lam, Sign.PLUS) - lam * eps

    best = min(expo(lam) for lam in cands)
    if refine:
        lo, hi = cands[0], cands[-1]
        # widen the bracket while the convex exponent still decreases
        while hi < 1e4 and expo(hi * 1.001) < expo(hi):
            hi *= 2.0
        res = minimize_scalar(expo, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-6 * lo})
        if np.isfinite(res.fun):
            best = min(best, float(res.fun))
    return min(cap, cap * _safe_exp(best))


def infinity_divergence(px: Mapping, py: Mapping) -> float:
    """``max log(pX/pY)`` over outcomes where both are positive."""
    raw = pld_from_distributions(px, py)
    if raw.losses.size == 0:
        return -math.inf
    return float(np.max(raw.losses))


def mgf_tail_correction(lam: float, L: float, sigma: float, dx: float, sign: Sign = Sign.PLUS) -> float:
    """MGF contribution of the Gaussian loss density outside ``[-L, L - dx]``.

    Uses ``e^{lam s} N(s; mu, 2mu) = e^{lam mu + lam^2 mu} N(s; mu + 2 lam mu, 2mu)``
    with ``mu = 1/(2 sigma^2)`` (``lam -> -lam`` for ``sign=MINUS``).
    """
    if not (0 < lam <= L):
        raise HypothesisViolated(f"need 0 < lambda <= L, got lambda={lam}, L={L}")
    if sigma < 1:
        raise HypothesisViolated(f"need sigma >= 1, got {sigma}")
    if not (0 < dx < L):
        raise HypothesisViolated(f"need 0 < dx < L, got dx={dx}, L={L}")
    return _gaussian_mgf_tail(lam, L, sigma, dx, sign)


def _gaussian_mgf_tail(lam: float, L: float, sigma: float, dx: float, sign: Sign = Sign.PLUS) -> float:
    t = int(sign) * lam
    mu = 1.0 / (2.0 * sigma * sigma)
    sd = 1.0 / sigma
    mean = mu + 2.0 * t * mu
    log_factor = t * mu + t * t * mu
    lo = log_ndtr((-L - mean) / sd)
    hi = log_ndtr(-((L - dx) - mean) / sd)
    return _safe_exp(log_factor + lo) + _safe_exp(log_factor + hi)


def _entry_log_mgf(item, lam: float, sign: Sign) -> float:
    if hasattr(item, "log_mgf_bound"):
        return item.log_mgf_bound(lam, sign)
    return log_mgf(item, lam, sign)


LATTICE_TOL = 1e-9


def _raw_losses(item) -> np.ndarray | None:
    """All finite atom losses of a discrete plan item, or None if it has none."""
    if isinstance(item, RawPld):
        return item.losses
    if getattr(item, "continuous", True):
        return None
    from .grid_pld import Direction

    dirs = [Direction.X_OVER_Y] if item.symmetric() else list(Direction)
    return np.concatenate([item.raw_pld(d).losses for d in dirs])


def lattice_step(plan) -> float | None:
    """Spacing ``h`` with every atom loss an integer multiple of ``h``, if one is evident.

    Only the smallest nonzero ``|loss|`` is tried as ``h``; None for
    continuous items or when the atoms are not commensurate with it.
    """
    parts = []
    for item, _ in _entries(plan):
        losses = _raw_losses(item)
        if losses is None:
            return None
        parts.append(losses)
    losses = np.concatenate(parts) if parts else np.empty(0)
    nz = np.abs(losses[losses != 0])
    if nz.size == 0:
        return None
    h = float(nz.min())
    ratio = losses / h
    if np.max(np.abs(ratio - np.rint(ratio))) > LATTICE_TOL:
        return None
    return h


def select_parameters(
    eta: float,
    plan,
    lambdas: Iterable[float] | None = None,
    n_cap: int = DEFAULT_N_CAP,
    align: bool = True,
) -> tuple[float, int]:
    """Grid ``(L, n)`` so that periodisation and discretisation bounds are each <= eta.

    ``plan`` is a list of ``(item, count)`` where ``item`` is a RawPld or an
    object with a ``log_mgf_bound(lam, sign)`` method (mechanism specs).

    With ``align``, a fully discrete plan whose losses share a lattice ``h``
    gets ``dx = h`` and a half-width widened to a multiple of it whenever that
    needs fewer points: every atom then sits on the grid and the
    discretisation error is exactly zero.
    """
    if not 0 < eta < 1:
        raise BadParameter(f"eta must lie in (0, 1), got {eta!r}")
    entries = _entries(plan)
    if not entries:
        raise BadParameter("empty plan")
    k = sum(c for _, c in entries)
    if k < 1:
        raise BadParameter("total composition count must be >= 1")
    cands = LambdaCandidates(tuple(lambdas)) if lambdas is not None else LambdaCandidates.default()

    def alphas(lam):
        ap = math.fsum(c * _entry_log_mgf(p, lam, Sign.PLUS) for p, c in entries)
        am = math.fsum(c * _entry_log_mgf(p, lam, Sign.MINUS) for p, c in entries)
        return ap, am

    log_inv = math.log(1.0 / eta)
    best_L, best_lam, best_a = math.inf, None, None
    for lam in cands:
        ap, am = alphas(lam)
        L = (log_inv + max(ap, am) + 1.0) / lam
        if math.isfinite(L) and 0 < L < best_L:
            best_L, best_lam, best_a = L, lam, (ap, am)
    if best_lam is None:
        raise Infeasible("no lambda candidate gives a finite positive window")
    L = best_L
    # the 1 - e^{-2 L lam} denominator can still push the bound over eta
    for _ in range(60):
        try:
            if periodisation_bound(best_a[0], best_a[1], L, best_lam) <= eta:
                break
        except Degenerate:
            pass
        L *= 1.25
    n = _next_pow2(math.ceil(2.0 * L * k / eta))
    h = lattice_step(entries) if align else None
    if h is not None:
        n_lat = _next_pow2(math.ceil(2.0 * L / h))
        if n_lat <= n:
            # x_i = (i - n/2) h, so every multiple of h in the window is a grid point
            return n_lat * h / 2.0, n_lat
    if n > n_cap:
        raise Infeasible(f"required grid size {n} exceeds the cap {n_cap} (L={L:.4g}, k={k}, eta={eta:.3g})")
    return L, n
