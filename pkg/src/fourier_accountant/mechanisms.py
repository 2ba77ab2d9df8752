"""Worst-case PLDs for supported mechanisms.

Discrete mechanisms yield exact :class:`RawPld` atoms. Continuous ones yield
grid PLDs directly, either from exact cell probabilities (snapped to the
right cell end for the upper side, the left end for the lower side) or from
the cellwise-maximum majorant and cellwise-minimum minorant of the density.
"""

from __future__ import annotations

import abc
import ast
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, ClassVar, Mapping

import numpy as np
from scipy import integrate
from scipy.optimize import minimize_scalar
from scipy.special import log_ndtr, logsumexp
from scipy.stats import binom

from .error_bounds import _gaussian_mgf_tail, mgf_tail_correction  # noqa: F401  (re-export)
from .errors import BadParameter, WindowTooSmall
from .grid_pld import (
    DiscretePld,
    Direction,
    Grid,
    RawPld,
    Side,
    Sign,
    discretize,
    log_mgf,
    pld_from_distributions,
    pld_from_log_pmfs,
)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# relative inflation applied to numerically located cell maxima
_MAX_INFLATION = 1e-12


# ---------------------------------------------------------------- discrete


def randomized_response_pld(p: float) -> RawPld:
    """Atoms ``(c_p, p)`` and ``(-c_p, 1 - p)`` with ``c_p = log(p / (1 - p))``."""
    if not 0.5 < p < 1.0:
        raise BadParameter(f"randomized response needs 1/2 < p < 1, got {p!r}")
    c = math.log(p) - math.log1p(-p)
    return RawPld(np.array([c, -c]), np.array([p, 1.0 - p]), 0.0, Direction.X_OVER_Y)


def binomial_pld(N: int, p: float, delta: int, direction: Direction = Direction.X_OVER_Y) -> RawPld:
    """PLD of ``delta + Bin(N, p)`` against ``Bin(N, p)``.

    Log-probabilities come from ``scipy.stats.binom.logpmf``, so tails far
    below the double range of a ratio still give exact losses.
    """
    _check_binomial(N, p, delta)
    t = np.arange(0, N + delta + 1)
    log_px = binom.logpmf(t - delta, N, p)
    log_py = binom.logpmf(t, N, p)
    return pld_from_log_pmfs(list(t), log_px, log_py, direction)


def _check_binomial(N, p, delta):
    if int(N) != N or N < 1:
        raise BadParameter(f"binomial N must be a positive integer, got {N!r}")
    if not 0.0 < p < 1.0:
        raise BadParameter(f"binomial p must lie in (0, 1), got {p!r}")
    if int(delta) != delta or delta < 1:
        raise BadParameter(f"binomial shift must be a positive integer, got {delta!r}")


def generic_discrete_pld(px: Mapping, py: Mapping) -> tuple[RawPld, RawPld]:
    """``(X/Y PLD, Y/X PLD)`` of a pair of discrete distributions."""
    return (
        pld_from_distributions(px, py, Direction.X_OVER_Y),
        pld_from_distributions(px, py, Direction.Y_OVER_X),
    )


def _same_raw(a: RawPld, b: RawPld) -> bool:
    if a.losses.size != b.losses.size or a.infinity_mass != b.infinity_mass:
        return False
    ia, ib = np.lexsort((a.masses, a.losses)), np.lexsort((b.masses, b.losses))
    return bool(
        np.allclose(a.losses[ia], b.losses[ib], rtol=1e-13, atol=1e-15)
        and np.allclose(a.masses[ia], b.masses[ib], rtol=1e-13, atol=0.0)
    )


# ---------------------------------------------------------------- continuous


def _gauss_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * z * z - math.log(sd) - _LOG_SQRT_2PI


def gaussian_pld_majorant(sigma: float, sensitivity: float, grid: Grid, side: Side = Side.RIGHT) -> DiscretePld:
    """Grid PLD of the Gaussian mechanism; loss ``~ N(mu, 2 mu)``, ``mu = 1/(2 sigma_eff^2)``.

    RIGHT: ``masses[i] = dx * max`` of the density over ``[x_{i-1}, x_i]``.
    LEFT: ``masses[j] = dx * min`` over ``[x_j, x_{j+1}]`` (last cell empty).
    ``excluded_mass`` holds the probability outside the covered cells.
    """
    if not (sigma > 0 and sensitivity > 0):
        raise BadParameter("gaussian needs sigma > 0 and sensitivity > 0")
    s_eff = sigma / sensitivity
    mu = 1.0 / (2.0 * s_eff * s_eff)
    sd = 1.0 / s_eff
    x = grid.points()
    dx = grid.dx
    if side is Side.RIGHT:
        nearest = np.clip(mu, x - dx, x)
        masses = dx * np.exp(_gauss_logpdf(nearest, mu, sd))
        lo, hi = grid.point(-1), grid.point(grid.n - 1)
        excluded = math.exp(log_ndtr((lo - mu) / sd)) + math.exp(log_ndtr(-(hi - mu) / sd))
    elif side is Side.LEFT:
        dens = np.exp(_gauss_logpdf(x, mu, sd))
        masses = np.zeros(grid.n)
        masses[:-1] = dx * np.minimum(dens[:-1], dens[1:])
        excluded = 0.0
    else:
        raise BadParameter("side must be LEFT or RIGHT")
    return DiscretePld(grid, masses, 0.0, side, excluded)


def gaussian_log_mgf(sigma: float, sensitivity: float, lam: float, sign: Sign = Sign.PLUS) -> float:
    """Exact ``log E[e^{+-lam S}]`` for ``S ~ N(mu, 2 mu)``."""
    mu = sensitivity * sensitivity / (2.0 * sigma * sigma)
    t = int(sign) * lam
    return mu * t + mu * t * t


_CELL_CHUNK = 1 << 20


def _cell_masses(log_cdf, log_sf, grid: Grid, side: Side) -> tuple[np.ndarray, float]:
    """Exact cell probabilities of a continuous law snapped to cell ends.

    RIGHT: mass of ``(x_{i-1}, x_i]`` at ``x_i``, everything below ``x_0`` at
    ``x_0``; mass above ``x_{n-1}`` is returned as excluded. LEFT: mass of
    ``[x_j, x_{j+1})`` at ``x_j``, everything above ``x_{n-1}`` at
    ``x_{n-1}``; mass below ``x_0`` is returned as excluded (dropped).
    Evaluated in chunks so large grids need no full-size temporaries.
    """
    if side not in (Side.LEFT, Side.RIGHT):
        raise BadParameter("side must be LEFT or RIGHT")
    n = grid.n
    masses = np.empty(n)
    # inner[i] = P(x_i < S <= x_{i+1}) for i < n - 1
    off = 1 if side is Side.RIGHT else 0
    for i0 in range(0, n - 1, _CELL_CHUNK):
        i1 = min(i0 + _CELL_CHUNK, n - 1)
        x = grid.point(np.arange(i0, i1 + 1))
        lc = log_cdf(x)
        ls = log_sf(x)
        # difference of whichever tail is smaller keeps relative accuracy
        inner = np.where(ls[:-1] < lc[1:], np.exp(ls[:-1]) - np.exp(ls[1:]), np.exp(lc[1:]) - np.exp(lc[:-1]))
        masses[i0 + off:i1 + off] = np.maximum(inner, 0.0)
    edges = np.array([grid.point(0), grid.point(n - 1)])
    below = float(np.exp(log_cdf(edges[:1]))[0])
    above = float(np.exp(log_sf(edges[1:]))[0])
    if side is Side.RIGHT:
        masses[0] = below
        return masses, above
    masses[-1] = above
    return masses, below


def gaussian_pld_cells(sigma: float, sensitivity: float, grid: Grid, side: Side = Side.RIGHT) -> DiscretePld:
    """Gaussian loss law ``N(mu, 2 mu)`` snapped to the grid with exact cell masses."""
    if not (sigma > 0 and sensitivity > 0):
        raise BadParameter("gaussian needs sigma > 0 and sensitivity > 0")
    s_eff = sigma / sensitivity
    mu = 1.0 / (2.0 * s_eff * s_eff)
    sd = 1.0 / s_eff
    masses, excluded = _cell_masses(
        lambda x: log_ndtr((x - mu) / sd), lambda x: log_ndtr(-(x - mu) / sd), grid, side
    )
    return DiscretePld(grid, masses, 0.0, side, excluded)


def subsampled_gaussian_pld_cells(
    q: float, sigma: float, grid: Grid, direction: Direction = Direction.X_OVER_Y, side: Side = Side.RIGHT
) -> DiscretePld:
    """Subsampled-Gaussian loss law snapped to the grid with exact cell masses."""
    if not (0.0 < q < 1.0 and sigma > 0):
        raise BadParameter("subsampled gaussian needs 0 < q < 1 and sigma > 0")
    dens = _SubsampledDensity(q, sigma, direction)
    masses, excluded = _cell_masses(dens.log_cdf, dens.log_sf, grid, side)
    return DiscretePld(grid, masses, 0.0, side, excluded)


class _SubsampledDensity:
    """Loss density of Poisson-subsampled Gaussian, X/Y or Y/X."""

    def __init__(self, q: float, sigma: float, direction: Direction):
        self.q, self.sigma, self.direction = q, sigma, direction
        self.log1mq = math.log1p(-q)
        self.s2 = sigma * sigma

    # support of the loss variable
    @property
    def support(self) -> tuple[float, float]:
        if self.direction is Direction.X_OVER_Y:
            return self.log1mq, math.inf
        return -math.inf, -self.log1mq

    def _g(self, s):
        """Outcome ``t`` whose X/Y loss equals ``s`` (requires ``s > log(1-q)``)."""
        # log(e^s - (1 - q)) computed as s + log1p(-(1-q) e^{-s})
        return self.s2 * (s + np.log1p(-np.exp(self.log1mq - s)) - math.log(self.q)) + 0.5

    def _log_gprime(self, s):
        return math.log(self.s2) - np.log1p(-np.exp(self.log1mq - s))

    def _log_fx(self, t):
        a = math.log(self.q) + _gauss_logpdf(t, 1.0, self.sigma)
        b = self.log1mq + _gauss_logpdf(t, 0.0, self.sigma)
        return np.logaddexp(a, b)

    def logpdf(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.full(s.shape, -np.inf)
        if self.direction is Direction.X_OVER_Y:
            ok = s > self.log1mq
            u = s[ok]
            t = self._g(u)
            out[ok] = self._log_fx(t) + self._log_gprime(u)
        else:
            ok = -s > self.log1mq
            u = -s[ok]
            t = self._g(u)
            out[ok] = _gauss_logpdf(t, 0.0, self.sigma) + self._log_gprime(u)
        return out

    def _log_cdf_t(self, t, upper: bool):
        """log P(T <= t) (or >= t) for T under the reference law of this direction."""
        sgn = -1.0 if upper else 1.0
        if self.direction is Direction.X_OVER_Y:
            a = math.log(self.q) + log_ndtr(sgn * (t - 1.0) / self.sigma)
            b = self.log1mq + log_ndtr(sgn * t / self.sigma)
            return float(np.logaddexp(a, b))
        return float(log_ndtr(sgn * t / self.sigma))

    def log_cdf(self, s) -> np.ndarray:
        """``log P(S <= s)`` elementwise."""
        return self._log_tail(np.asarray(s, dtype=float), below=True)

    def log_sf(self, s) -> np.ndarray:
        """``log P(S > s)`` elementwise."""
        return self._log_tail(np.asarray(s, dtype=float), below=False)

    def _log_tail(self, s: np.ndarray, below: bool) -> np.ndarray:
        lo, hi = self.support
        out = np.empty(s.shape)
        inside = (s > lo) & (s < hi)
        if below:
            out[s <= lo] = -np.inf
            out[s >= hi] = 0.0
        else:
            out[s <= lo] = 0.0
            out[s >= hi] = -np.inf
        u = s[inside]
        if self.direction is Direction.X_OVER_Y:
            # S <= s  iff  T <= g(s), T ~ f_X
            t = self._g(u)
            sgn = 1.0 if below else -1.0
            a = math.log(self.q) + log_ndtr(sgn * (t - 1.0) / self.sigma)
            b = self.log1mq + log_ndtr(sgn * t / self.sigma)
            out[inside] = np.logaddexp(a, b)
        else:
            # S <= s  iff  T >= g(-s), T ~ f_Y
            t = self._g(-u)
            sgn = -1.0 if below else 1.0
            out[inside] = log_ndtr(sgn * t / self.sigma)
        return out

    def prob_below(self, b: float) -> float:
        lo, hi = self.support
        if b <= lo:
            return 0.0
        if b >= hi:
            return 1.0
        if self.direction is Direction.X_OVER_Y:
            return math.exp(self._log_cdf_t(float(self._g(b)), upper=False))
        return math.exp(self._log_cdf_t(float(self._g(-b)), upper=True))

    def prob_above(self, a: float) -> float:
        lo, hi = self.support
        if a <= lo:
            return 1.0
        if a >= hi:
            return 0.0
        if self.direction is Direction.X_OVER_Y:
            return math.exp(self._log_cdf_t(float(self._g(a)), upper=True))
        return math.exp(self._log_cdf_t(float(self._g(-a)), upper=False))

    def log_mgf(self, lam: float, sign: Sign) -> float:
        """``log E[e^{+-lam S}]`` by quadrature in the outcome variable."""
        t_sign = int(sign) * lam
        q, sig = self.q, self.sigma

        def log_fx(t):
            return np.logaddexp(math.log(q) + _gauss_logpdf(t, 1.0, sig), self.log1mq + _gauss_logpdf(t, 0.0, sig))

        def log_fy(t):
            return _gauss_logpdf(t, 0.0, sig)

        if self.direction is Direction.X_OVER_Y:
            def log_integrand(t):
                return (1.0 + t_sign) * log_fx(t) - t_sign * log_fy(t)
        else:
            def log_integrand(t):
                return (1.0 + t_sign) * log_fy(t) - t_sign * log_fx(t)

        lo = -12.0 * sig - 2.0 * lam - 2.0
        hi = 12.0 * sig + 2.0 * lam + 2.0
        probe = np.linspace(lo, hi, 4001)
        vals = log_integrand(probe)
        shift = float(np.max(vals))
        peak = float(probe[np.argmax(vals)])
        res, _ = integrate.quad(lambda t: math.exp(float(log_integrand(t)) - shift), lo, hi,
                                points=[peak], limit=400, epsabs=0.0, epsrel=1e-12)
        return shift + math.log(res)


@lru_cache(maxsize=4096)
def _subsampled_log_mgf(q: float, sigma: float, direction: Direction, lam: float, sign: int) -> float:
    return _SubsampledDensity(q, sigma, direction).log_mgf(lam, Sign(sign))


def _refine_cell_max(logpdf, a: float, b: float) -> float:
    res = minimize_scalar(lambda s: -float(logpdf(s)[0]), bounds=(a, b), method="bounded",
                          options={"xatol": 1e-14 * max(1.0, abs(a))})
    return -float(res.fun)


def subsampled_gaussian_pld_majorant(
    q: float,
    sigma: float,
    grid: Grid,
    direction: Direction = Direction.X_OVER_Y,
    side: Side = Side.RIGHT,
) -> DiscretePld:
    """Grid PLD of the Poisson-subsampled Gaussian mechanism.

    The density is sampled at every cell edge. Cell maxima sit at an edge
    except near sampled local maxima, where the interior maximum is located
    with a bounded scalar search and inflated by a relative 1e-12. The cell
    cut by the support edge is also scanned at 64 points before refining.
    """
    if not (0.0 < q < 1.0 and sigma > 0):
        raise BadParameter("subsampled gaussian needs 0 < q < 1 and sigma > 0")
    dens = _SubsampledDensity(q, sigma, direction)
    dx = grid.dx
    n = grid.n
    edges = grid.point(np.arange(-1, n))  # x_{-1} .. x_{n-1}
    with np.errstate(divide="ignore", invalid="ignore"):
        logv = dens.logpdf(edges)
    lo_sup, hi_sup = dens.support
    if side is Side.RIGHT:
        # cell i spans [edges[i], edges[i+1]] = [x_{i-1}, x_i]
        cell_log = np.maximum(logv[:-1], logv[1:])
        cand = set()
        interior = np.flatnonzero(
            np.isfinite(logv[1:-1]) & (logv[1:-1] >= logv[:-2]) & (logv[1:-1] >= logv[2:])
        ) + 1
        for p in interior:
            cand.update((p - 1, p))
        # cell containing the support edge
        for edge in (lo_sup, hi_sup):
            if math.isfinite(edge) and edges[0] < edge < edges[-1]:
                j = int(np.searchsorted(edges, edge) - 1)
                a, b = (edge, edges[j + 1]) if edge == lo_sup else (edges[j], edge)
                scan = np.linspace(a, b, 66)[1:-1]
                with np.errstate(divide="ignore", invalid="ignore"):
                    sv = dens.logpdf(scan)
                k = int(np.argmax(sv))
                best = float(sv[k])
                if np.isfinite(best):
                    lo_k = scan[max(k - 1, 0)]
                    hi_k = scan[min(k + 1, scan.size - 1)]
                    best = max(best, _refine_cell_max(dens.logpdf, lo_k, hi_k))
                cell_log[j] = max(cell_log[j], best)
        for c in cand:
            if 0 <= c < n:
                a, b = max(edges[c], lo_sup), min(edges[c + 1], hi_sup)
                if a < b:
                    cell_log[c] = max(cell_log[c], _refine_cell_max(dens.logpdf, a, b))
        masses = dx * np.exp(cell_log) * (1.0 + _MAX_INFLATION)
        excluded = dens.prob_below(edges[0]) + dens.prob_above(edges[-1])
    elif side is Side.LEFT:
        # cell j spans [x_j, x_{j+1}] = [edges[j+1], edges[j+2]]; minima sit at edges
        # for a density without interior local minima
        v = np.exp(logv[1:])
        masses = np.zeros(n)
        masses[:-1] = dx * np.minimum(v[:-1], v[1:])
        excluded = 0.0
    else:
        raise BadParameter("side must be LEFT or RIGHT")
    masses = np.where(np.isfinite(masses), masses, 0.0)
    if side is Side.RIGHT and excluded > 0.5:
        raise WindowTooSmall(f"window [-{grid.L}, {grid.L}) misses {excluded:.3g} of the loss mass")
    return DiscretePld(grid, masses, 0.0, side, excluded)


# ---------------------------------------------------------------- specs


class MechanismSpec(abc.ABC):
    """Parameters of one mechanism plus the PLD constructors it needs."""

    kind: ClassVar[str]
    continuous: ClassVar[bool] = False

    @abc.abstractmethod
    def params(self) -> dict[str, Any]:
        ...

    def symmetric(self) -> bool:
        """True when the X/Y and Y/X PLDs coincide."""
        return False

    def grid_pld(self, grid: Grid, direction: Direction, side: Side) -> DiscretePld:
        return discretize(self.raw_pld(direction), grid, side, policy="clamp")

    def raw_pld(self, direction: Direction) -> RawPld:
        raise NotImplementedError(f"{self.kind} has no finite atomic PLD")

    def log_mgf_exact(self, lam: float, sign: Sign, direction: Direction) -> float:
        return log_mgf(self.raw_pld(direction), lam, sign)

    def log_mgf_bound(self, lam: float, sign: Sign = Sign.PLUS) -> float:
        """Max over both directions of the exact log-MGF (used by the selector)."""
        dirs = [Direction.X_OVER_Y] if self.symmetric() else list(Direction)
        return max(self.log_mgf_exact(lam, sign, d) for d in dirs)

    def mgf_correction(self, lam: float, sign: Sign, grid: Grid) -> float:
        """Additive correction to ``e^alpha`` of the grid PLD (0 for discrete)."""
        return 0.0

    @property
    def majorant(self) -> bool:
        """True when the RIGHT grid PLD carries more mass than the law it bounds."""
        return False

    def rdp(self, order: float) -> float | None:
        return None

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.params()}

    def canonical(self) -> str:
        parts = []
        for key, val in self.params().items():
            if isinstance(val, dict):
                parts.append(f"{key}={json.dumps(val, sort_keys=True)}")
            else:
                parts.append(f"{key}={val!r}")
        return f"{self.kind}({', '.join(parts)})"

    def __str__(self) -> str:
        return self.canonical()

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "MechanismSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        cls = _KINDS.get(kind)
        if cls is None:
            raise BadParameter(f"unknown mechanism kind {kind!r}; expected one of {sorted(_KINDS)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise BadParameter(f"bad parameters for {kind}: {exc}") from None

    @staticmethod
    def parse(text: str) -> "MechanismSpec":
        """Inverse of :meth:`canonical`, e.g. ``gaussian(sigma=5.0, sensitivity=1.0)``."""
        try:
            node = ast.parse(text.strip(), mode="eval").body
        except SyntaxError as exc:
            raise BadParameter(f"cannot parse mechanism spec {text!r}: {exc.msg}") from None
        if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)) or node.args:
            raise BadParameter(f"mechanism spec must look like kind(key=value, ...), got {text!r}")
        try:
            kwargs = {kw.arg: ast.literal_eval(kw.value) for kw in node.keywords}
        except ValueError:
            raise BadParameter(f"mechanism parameters must be literals in {text!r}") from None
        return MechanismSpec.from_dict({"kind": node.func.id, **kwargs})


@dataclass(frozen=True)
class RandomizedResponse(MechanismSpec):
    p: float
    kind: ClassVar[str] = "randomized_response"

    def __post_init__(self):
        randomized_response_pld(self.p)

    def params(self):
        return {"p": self.p}

    def symmetric(self):
        return True

    def raw_pld(self, direction):
        raw = randomized_response_pld(self.p)
        return RawPld(raw.losses, raw.masses, 0.0, direction)

    def rdp(self, order):
        from .comparators import rdp_randomized_response

        return rdp_randomized_response(order, self.p)


_DISCRETIZATIONS = ("cells", "majorant")


def _check_discretization(value):
    if value not in _DISCRETIZATIONS:
        raise BadParameter(f"discretization must be one of {_DISCRETIZATIONS}, got {value!r}")


@dataclass(frozen=True)
class Gaussian(MechanismSpec):
    """Gaussian mechanism; ``discretization`` picks exact cell masses or the cell-max majorant."""

    sigma: float
    sensitivity: float = 1.0
    discretization: str = "cells"
    kind: ClassVar[str] = "gaussian"
    continuous: ClassVar[bool] = True

    def __post_init__(self):
        if not (self.sigma > 0 and self.sensitivity > 0):
            raise BadParameter("gaussian needs sigma > 0 and sensitivity > 0")
        _check_discretization(self.discretization)

    @property
    def sigma_eff(self) -> float:
        return self.sigma / self.sensitivity

    @property
    def majorant(self) -> bool:
        return self.discretization == "majorant"

    def params(self):
        out = {"sigma": self.sigma, "sensitivity": self.sensitivity}
        if self.majorant:
            out["discretization"] = self.discretization
        return out

    def symmetric(self):
        return True

    def grid_pld(self, grid, direction, side):
        if self.majorant:
            return gaussian_pld_majorant(self.sigma, self.sensitivity, grid, side)
        return gaussian_pld_cells(self.sigma, self.sensitivity, grid, side)

    def log_mgf_exact(self, lam, sign, direction):
        return gaussian_log_mgf(self.sigma, self.sensitivity, lam, sign)

    def mgf_correction(self, lam, sign, grid):
        return _gaussian_mgf_tail(lam, grid.L, self.sigma_eff, grid.dx, sign)

    def rdp(self, order):
        from .comparators import rdp_gaussian

        return rdp_gaussian(order, self.sigma_eff)


@dataclass(frozen=True)
class SubsampledGaussian(MechanismSpec):
    """Poisson-subsampled Gaussian mechanism (sampling rate ``q``)."""

    q: float
    sigma: float
    discretization: str = "cells"
    kind: ClassVar[str] = "subsampled_gaussian"
    continuous: ClassVar[bool] = True

    def __post_init__(self):
        if not (0.0 < self.q < 1.0 and self.sigma > 0):
            raise BadParameter("subsampled gaussian needs 0 < q < 1 and sigma > 0")
        _check_discretization(self.discretization)

    @property
    def majorant(self) -> bool:
        return self.discretization == "majorant"

    def params(self):
        out = {"q": self.q, "sigma": self.sigma}
        if self.majorant:
            out["discretization"] = self.discretization
        return out

    def grid_pld(self, grid, direction, side):
        if self.majorant:
            return subsampled_gaussian_pld_majorant(self.q, self.sigma, grid, direction, side)
        return subsampled_gaussian_pld_cells(self.q, self.sigma, grid, direction, side)

    def log_mgf_exact(self, lam, sign, direction):
        return _subsampled_log_mgf(self.q, self.sigma, direction, float(lam), int(sign))


@dataclass(frozen=True)
class Binomial(MechanismSpec):
    N: int
    p: float
    delta: int = 1
    kind: ClassVar[str] = "binomial"

    def __post_init__(self):
        _check_binomial(self.N, self.p, self.delta)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "delta", int(self.delta))

    def params(self):
        return {"N": self.N, "p": self.p, "delta": self.delta}

    def symmetric(self):
        return self.p == 0.5

    def raw_pld(self, direction):
        return binomial_pld(self.N, self.p, self.delta, direction)


@dataclass(frozen=True, eq=False)
class GenericDiscrete(MechanismSpec):
    px: dict
    py: dict
    kind: ClassVar[str] = "generic_discrete"

    def __post_init__(self):
        pair = generic_discrete_pld(self.px, self.py)
        object.__setattr__(self, "_pair", pair)

    def params(self):
        return {"px": dict(self.px), "py": dict(self.py)}

    def symmetric(self):
        return _same_raw(*self._pair)

    def raw_pld(self, direction):
        return self._pair[0] if direction is Direction.X_OVER_Y else self._pair[1]

    def __eq__(self, other):
        return isinstance(other, GenericDiscrete) and self.params() == other.params()

    def __hash__(self):
        return hash(self.canonical())


@dataclass(frozen=True, eq=False)
class RawPair(MechanismSpec):
    """Caller-supplied atomic PLDs for both directions."""

    xy: RawPld
    yx: RawPld | None = None
    kind: ClassVar[str] = "raw_pld"

    def params(self):
        return {
            "xy": {"losses": self.xy.losses.tolist(), "masses": self.xy.masses.tolist(),
                   "infinity_mass": self.xy.infinity_mass},
        }

    def symmetric(self):
        return self.yx is None or _same_raw(self.xy, self.yx)

    def raw_pld(self, direction):
        if direction is Direction.Y_OVER_X and self.yx is not None:
            return self.yx
        return self.xy


_KINDS: dict[str, type[MechanismSpec]] = {
    cls.kind: cls for cls in (RandomizedResponse, Gaussian, SubsampledGaussian, Binomial, GenericDiscrete)
}
