"""Heterogeneous FFT composition, delta(eps) tail sums and certified bounds.

The low-level pieces (``compose``, ``delta_estimate``, ``plancherel_delta``)
are pure functions on grid PLDs. :class:`FourierAccountant` wires them to
mechanism specs: it snaps every mechanism to the grid from both sides
(RIGHT for the upper bound, LEFT for the lower bound) and in both
directions, composes, and attaches an a-priori error budget.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import spectral
from .error_bounds import (
    ErrorBudget,
    LambdaCandidates,
    periodisation_bound,
    select_parameters,
    truncation_bound,
)
from .errors import BadParameter, Degenerate, GridMismatch, NonRealResult, TargetUnreachable
from .grid_pld import DiscretePld, Direction, Grid, RawPld, Side, Sign
from .mechanisms import MechanismSpec, RawPair

EPS_TOL = 1e-4
EPS_MAX_ITER = 60


# ---------------------------------------------------------------- pure layer


@dataclass(frozen=True)
class CompositionPlan:
    """Grid PLDs with repetition counts; all entries share one grid."""

    entries: tuple

    def __post_init__(self):
        entries = tuple((pld, int(k)) for pld, k in self.entries)
        if not entries:
            raise BadParameter("composition plan is empty")
        grid = entries[0][0].grid
        for pld, k in entries:
            if pld.grid != grid:
                raise GridMismatch(f"plan mixes grids {grid} and {pld.grid}")
            if k < 1:
                raise BadParameter(f"composition counts must be >= 1, got {k}")
        object.__setattr__(self, "entries", entries)

    @property
    def grid(self) -> Grid:
        return self.entries[0][0].grid

    @property
    def total_k(self) -> int:
        return sum(k for _, k in self.entries)


# tilted spectra must stay below this log-magnitude after raising to k
_LOG_TILT_MAX = 700.0


def _factor_spectrum(masses: np.ndarray, k: int, grid: Grid, tilt: float) -> tuple[np.ndarray, float]:
    """``F(D a)^k`` (tilted if ``tilt``) and the log of its total mass."""
    s = spectral.pld_spectrum(masses, tilt, grid.dx)
    # the zero-frequency coefficient sits first in bit-reversed order too
    log_total = k * math.log(max(s[0].real, np.finfo(float).tiny))
    if log_total > _LOG_TILT_MAX:
        raise BadParameter(f"tilt {tilt:g} makes the composed masses overflow; use a smaller tilt")
    spectral.power_inplace(s, k)
    return s, log_total


def composed_spectrum(plan: CompositionPlan, tilt: float = 0.0) -> np.ndarray:
    """Bit-reversed ``prod_j F(D a^j)^{k_j}``, of ``e^{tilt x}``-scaled masses if asked."""
    return _composed_spectrum(plan, tilt)[0]


def _composed_spectrum(plan: CompositionPlan, tilt: float) -> tuple[np.ndarray, float]:
    acc, log_total = None, 0.0
    for pld, k in plan.entries:
        s, lt = _factor_spectrum(pld.masses, k, plan.grid, tilt)
        log_total += lt
        if log_total > _LOG_TILT_MAX:
            raise BadParameter(f"tilt {tilt:g} makes the composed masses overflow; use a smaller tilt")
        if acc is None:
            acc = s
        else:
            acc *= s
            del s
    return acc, log_total


def _composed_meta(plan: CompositionPlan) -> tuple[float, float, float]:
    keep = 1.0
    total = 1.0
    excluded = 0.0
    for pld, k in plan.entries:
        keep *= (1.0 - pld.infinity_mass) ** k
        total *= pld.total_mass ** k
        excluded += k * pld.excluded_mass
    return 1.0 - keep, total, excluded


def compose(plan: CompositionPlan, tilt: float = 0.0) -> DiscretePld:
    """``D F^{-1}(prod_j F(D a^j)^{k_j})``; infinity masses combine as a product.

    A positive ``tilt`` composes ``e^{tilt x}``-scaled masses and scales back
    afterwards. Round-off is then relative to the tilted law, which puts
    more weight on the upper tail where small deltas live. Only ``x >= 0``
    is kept in that case.
    """
    spec, log_total = _composed_spectrum(plan, tilt)
    inf_mass, total, excluded = _composed_meta(plan)
    if tilt:
        total = math.exp(log_total)
    masses, slack = spectral.spectrum_to_masses(spec, total, overwrite=True, tilt=tilt, dx=plan.grid.dx)
    del spec
    sides = {pld.side for pld, _ in plan.entries}
    side = sides.pop() if len(sides) == 1 else Side.EXACT
    slack += sum(k * pld.fft_clamp_slack for pld, k in plan.entries)
    return DiscretePld(plan.grid, masses, inf_mass, side, excluded, slack)


def _first_above(grid: Grid, eps: float) -> int:
    """Smallest index with ``x_i > eps`` (may be ``n``)."""
    i = int(math.floor((eps + grid.L) / grid.dx)) + 1
    i = max(i, 0)
    while i > 0 and grid.point(i - 1) > eps:
        i -= 1
    while i < grid.n and grid.point(i) <= eps:
        i += 1
    return min(i, grid.n)


def tail_weights(grid: Grid, eps: float) -> np.ndarray:
    """``w_l = max(1 - e^{eps - x_l}, 0)``, exactly zero for ``x_l <= eps``."""
    w = np.zeros(grid.n)
    i0 = _first_above(grid, eps)
    if i0 < grid.n:
        w[i0:] = -np.expm1(eps - grid.point(np.arange(i0, grid.n)))
    return w


def delta_estimate(composed: DiscretePld, eps: float) -> float:
    """Infinity mass plus ``sum_{x_l > eps} (1 - e^{eps - x_l}) b_l``."""
    grid = composed.grid
    i0 = _first_above(grid, eps)
    if i0 >= grid.n:
        return composed.infinity_mass
    x = grid.point(np.arange(i0, grid.n))
    tail = float(np.dot(-np.expm1(eps - x), composed.masses[i0:]))
    return composed.infinity_mass + tail


def plancherel_delta(spectrum_powers: np.ndarray, w_spectrum: np.ndarray, n: int, w_norm2: float | None = None) -> float:
    """``(1/n) Re <F(D w_eps), F(D a)^k>`` without the infinity term.

    Both spectra must be in the same coefficient order. The imaginary part is
    checked against the Cauchy-Schwarz scale of the product; pass
    ``w_norm2 = <w, w>`` when calling repeatedly with the same weights.
    """
    if spectrum_powers.shape != w_spectrum.shape or spectrum_powers.shape[0] != n:
        raise GridMismatch("spectra must both have length n")
    z = spectral.inner_product(w_spectrum, spectrum_powers) / n
    if w_norm2 is None:
        w_norm2 = spectral.inner_product_real(w_spectrum, w_spectrum)
    scale = math.sqrt(w_norm2 * spectral.inner_product_real(spectrum_powers, spectrum_powers)) / n
    if abs(z.imag) > spectral.IMAG_RESIDUE_TOL * max(scale, np.finfo(float).tiny):
        raise NonRealResult(f"imaginary residue {z.imag:.3e} in Plancherel inner product")
    return z.real


# ---------------------------------------------------------------- bounds


@dataclass(frozen=True)
class DeltaBound:
    """delta estimate with a certified interval ``[lower, upper]``."""

    eps: float
    estimate: float
    upper: float
    lower: float
    budget: ErrorBudget
    direction: Direction
    per_direction: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _as_spec(item) -> MechanismSpec:
    if isinstance(item, MechanismSpec):
        return item
    if isinstance(item, RawPld):
        return RawPair(item)
    if isinstance(item, tuple) and len(item) == 2 and all(isinstance(p, RawPld) for p in item):
        return RawPair(item[0], item[1])
    if isinstance(item, str):
        return MechanismSpec.parse(item)
    if isinstance(item, dict):
        return MechanismSpec.from_dict(item)
    raise BadParameter(f"cannot interpret {item!r} as a mechanism")


def _normalize_entries(mechanisms) -> list[tuple[MechanismSpec, int]]:
    out = []
    for entry in mechanisms:
        if isinstance(entry, MechanismSpec):
            spec, count = entry, 1
        elif isinstance(entry, tuple) and len(entry) == 2 and not isinstance(entry[0], RawPld):
            spec, count = _as_spec(entry[0]), entry[1]
        elif isinstance(entry, tuple) and len(entry) == 2 and isinstance(entry[1], (int, np.integer)):
            spec, count = _as_spec(entry[0]), entry[1]
        else:
            spec, count = _as_spec(entry), 1
        if int(count) != count or count < 1:
            raise BadParameter(f"composition counts must be positive integers, got {count!r}")
        out.append((spec, int(count)))
    if not out:
        raise BadParameter("no mechanisms given")
    return out


def _log_mgf_table(pld: DiscretePld, lambdas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``alpha(lambda)`` for both signs over a lambda table, one pass per lambda."""
    idx = np.flatnonzero(pld.masses)
    if idx.size == 0:
        neg = np.full(lambdas.size, -np.inf)
        return neg, neg.copy()
    x = pld.grid.point(idx)
    logm = np.log(pld.masses[idx])
    plus = np.empty(lambdas.size)
    minus = np.empty(lambdas.size)
    buf = np.empty_like(x)
    for j, lam in enumerate(lambdas):
        for sgn, out in ((1.0, plus), (-1.0, minus)):
            np.multiply(x, sgn * lam, out=buf)
            buf += logm
            m = float(buf.max())
            np.subtract(buf, m, out=buf)
            np.exp(buf, out=buf)
            out[j] = m + math.log(float(buf.sum()))
    return plus, minus


@dataclass(frozen=True)
class _PldSummary:
    """Scalars of a grid PLD kept in low-memory mode; masses are rebuilt on demand."""

    grid: Grid
    side: Side
    source: Direction
    infinity_mass: float
    excluded_mass: float
    total_mass: float
    fft_clamp_slack: float = 0.0

    @classmethod
    def of(cls, pld: DiscretePld, source: Direction) -> "_PldSummary":
        return cls(pld.grid, pld.side, source, pld.infinity_mass, pld.excluded_mass,
                   pld.total_mass, pld.fft_clamp_slack)


# grids at least this large default to low-memory mode
LOW_MEMORY_N = 1 << 26


@dataclass
class _MechState:
    spec: MechanismSpec
    count: int
    # (direction, side) -> DiscretePld
    plds: dict
    # (direction, side) -> (alpha_plus, alpha_minus) arrays over the lambda table
    alphas: dict
    # direction -> corrected right-side alphas (plus, minus)
    alphas_r_corr: dict
    # direction -> True when LEFT and RIGHT grid PLDs coincide
    exact: dict = field(default_factory=dict)


def _accountant_lambdas(L: float) -> np.ndarray:
    env = LambdaCandidates.from_env()
    if env is not None:
        return np.array(env.values)
    base = LambdaCandidates.default(L).values
    dense = np.geomspace(2.0 ** -4, 8.0 * L, 40)
    return np.array(sorted(set(base) | set(dense.tolist())))


class FourierAccountant:
    """Certified (eps, delta) accountant for a heterogeneous composition.

    Parameters
    ----------
    L, n : window half-width and grid size (``n`` rounds up to a power of two).
    eta : when given instead of ``L, n``, the grid is chosen automatically so
        that periodisation and discretisation errors are each about ``eta``.
    sides : which grid approximations to compose; ``("right",)`` skips the
        lower bound and halves the work.
    tilt : exponential tilt ``t >= 0`` applied before the transforms. It cuts
        relative round-off for deltas far in the tail (around 1e-12) at the
        price of an ``e^{2 L t}`` factor on the upper-tail wrap-around term.
    """

    def __init__(
        self,
        L: float | None = None,
        n: int | None = None,
        *,
        grid: Grid | None = None,
        eta: float | None = None,
        lambdas: Sequence[float] | None = None,
        sides: Sequence[str] = ("right", "left"),
        low_memory: bool | None = None,
        tilt: float = 0.0,
    ):
        self.L = L
        self.n = n
        self.grid = grid
        self.eta = eta
        self.lambdas = lambdas
        self.sides = tuple(sides)
        self.low_memory = low_memory
        self.tilt = tilt

    def get_params(self) -> dict:
        return {"L": self.L, "n": self.n, "grid": self.grid, "eta": self.eta,
                "lambdas": self.lambdas, "sides": self.sides, "low_memory": self.low_memory,
                "tilt": self.tilt}

    # ---- setup

    def fit(self, mechanisms) -> "FourierAccountant":
        """Build grid PLDs for ``[(mechanism, count), ...]``; returns ``self``."""
        entries = _normalize_entries(mechanisms)
        sides = []
        for s in self.sides:
            try:
                sides.append(Side(s) if not isinstance(s, Side) else s)
            except ValueError:
                raise BadParameter(f"unknown side {s!r}") from None
        if Side.RIGHT not in sides or Side.EXACT in sides:
            raise BadParameter("sides must include 'right' and may include 'left'")
        self._sides = sides
        self.grid_ = self._resolve_grid(entries)
        tilt = float(self.tilt)
        if not (tilt >= 0 and tilt * self.grid_.L <= _LOG_TILT_MAX):
            raise BadParameter(f"tilt must lie in [0, {_LOG_TILT_MAX:g}/L], got {self.tilt!r}")
        self.tilt_ = tilt
        if self.lambdas is not None:
            self.lambdas_ = np.array(LambdaCandidates(tuple(self.lambdas)).values)
        else:
            self.lambdas_ = _accountant_lambdas(self.grid_.L)
        self._lean = self.low_memory if self.low_memory is not None else self.grid_.n >= LOW_MEMORY_N
        self.directions_ = [Direction.X_OVER_Y]
        if not all(spec.symmetric() for spec, _ in entries):
            self.directions_.append(Direction.Y_OVER_X)
        self._mechs = [self._prepare(spec, count) for spec, count in entries]
        self._composed = {}
        self._spectra = {}
        return self

    def _resolve_grid(self, entries) -> Grid:
        if self.grid is not None:
            return self.grid
        if self.L is not None and self.n is not None:
            return Grid(self.L, self.n)
        if self.eta is not None:
            L, n = select_parameters(self.eta, entries)
            return Grid(L, n)
        raise BadParameter("give either (L, n), a Grid, or eta")

    def _prepare(self, spec: MechanismSpec, count: int) -> _MechState:
        plds, alphas, corr, exact = {}, {}, {}, {}
        sym = spec.symmetric()
        for d in self.directions_:
            src = Direction.X_OVER_Y if sym else d
            if (src, Side.RIGHT) not in plds:
                built = {}
                for side in (Side.RIGHT, Side.LEFT):
                    pld = spec.grid_pld(self.grid_, src, side)
                    if spec.continuous and not spec.majorant:
                        alphas[(src, side)] = self._snapped_law_alphas(spec, pld, src)
                    else:
                        alphas[(src, side)] = _log_mgf_table(pld, self.lambdas_)
                    built[side] = pld
                r, l = built[Side.RIGHT], built[Side.LEFT]
                # every atom already on the grid: both snaps agree exactly
                exact[src] = (not spec.continuous and r.excluded_mass == 0 and l.excluded_mass == 0
                              and np.array_equal(r.masses, l.masses))
                for side, pld in built.items():
                    plds[(src, side)] = _PldSummary.of(pld, src) if self._lean else pld
                del built, r, l
            exact[d] = exact[src]
            for side in (Side.RIGHT, Side.LEFT):
                plds[(d, side)] = plds[(src, side)]
                alphas[(d, side)] = alphas[(src, side)]
            ap, am = alphas[(d, Side.RIGHT)]
            if spec.majorant:
                cp = np.array([spec.mgf_correction(l, Sign.PLUS, self.grid_) for l in self.lambdas_])
                cm = np.array([spec.mgf_correction(l, Sign.MINUS, self.grid_) for l in self.lambdas_])
                with np.errstate(divide="ignore"):
                    ap = np.logaddexp(ap, np.log(cp))
                    am = np.logaddexp(am, np.log(cm))
            corr[d] = (ap, am)
        return _MechState(spec, count, plds, alphas, corr, exact)

    def _snapped_law_alphas(self, spec: MechanismSpec, pld: DiscretePld, direction: Direction):
        """Log-MGF bounds for a continuous law snapped with exact cell masses.

        Interior cells move mass by at most dx (up for RIGHT, down for LEFT),
        so ``alpha(lam) + lam dx`` covers them on the moved side and the exact
        ``alpha`` bounds the other side. The edge cell that collects a whole
        tail is added on separately at its grid position.
        """
        lam = self.lambdas_
        plus = np.array([spec.log_mgf_exact(l, Sign.PLUS, direction) for l in lam])
        minus = np.array([spec.log_mgf_exact(l, Sign.MINUS, direction) for l in lam])
        g = self.grid_
        if pld.side is Side.RIGHT:
            edge = pld.masses[0]
            with np.errstate(divide="ignore"):
                plus = np.logaddexp(plus + lam * g.dx, np.log(edge) + lam * g.point(0))
            return plus, minus
        edge = pld.masses[-1]
        with np.errstate(divide="ignore"):
            minus = np.logaddexp(minus + lam * g.dx, np.log(edge) - lam * g.point(g.n - 1))
        return plus, minus

    def _check_fitted(self):
        if not hasattr(self, "_mechs"):
            raise BadParameter("call fit() first")

    # ---- composition

    def _grid_pld(self, m: _MechState, direction: Direction, side: Side) -> DiscretePld:
        p = m.plds[(direction, side)]
        if isinstance(p, _PldSummary):
            return m.spec.grid_pld(self.grid_, p.source, side)
        return p

    def plan(self, direction: Direction, side: Side, scale: int = 1) -> CompositionPlan:
        self._check_fitted()
        return CompositionPlan(tuple((self._grid_pld(m, direction, side), m.count * scale) for m in self._mechs))

    def composed(self, direction: Direction, side: Side) -> DiscretePld:
        """Composition of the fitted plan for one direction and side.

        In low-memory mode only the points ``x >= 0`` are filled in (every
        delta query has ``eps >= 0``) and the lower half reads as zero.
        """
        key = (direction, side)
        if key not in self._composed:
            # identical inputs (symmetric plans) share one composition
            for (d2, s2), c in self._composed.items():
                if s2 is side and all(m.plds[(d2, s2)] is m.plds[key] for m in self._mechs):
                    self._composed[key] = c
                    break
            else:
                self._composed[key] = self._compose_lean(key) if self._lean else compose(self.plan(direction, side), self.tilt_)
        return self._composed[key]

    def _compose_lean(self, key) -> DiscretePld:
        acc, log_total = None, 0.0
        for m in self._mechs:
            pld = self._grid_pld(m, *key)
            s, lt = _factor_spectrum(pld.masses, m.count, self.grid_, self.tilt_)
            del pld
            log_total += lt
            if log_total > _LOG_TILT_MAX:
                raise BadParameter(f"tilt {self.tilt_:g} makes the composed masses overflow; use a smaller tilt")
            if acc is None:
                acc = s
            else:
                acc *= s
            del s
        meta = CompositionPlan(tuple((m.plds[key], m.count) for m in self._mechs))
        inf_mass, total, excluded = _composed_meta(meta)
        if self.tilt_:
            total = math.exp(log_total)
        masses, slack = spectral.spectrum_to_masses(acc, total, overwrite=True, upper_only=True,
                                                    tilt=self.tilt_, dx=self.grid_.dx)
        del acc
        slack += sum(m.count * m.plds[key].fft_clamp_slack for m in self._mechs)
        return DiscretePld(self.grid_, masses, inf_mass, key[1], excluded, slack)

    # ---- budgets

    def _budget_parts(self, direction: Direction, eps: float, scale: int = 1) -> dict:
        g = self.grid_
        lam = self.lambdas_
        mechs = self._mechs
        ks = [m.count * scale for m in mechs]
        k_tot = sum(ks)
        A_r_plus = sum(k * m.alphas_r_corr[direction][0] for m, k in zip(mechs, ks))
        A_r_minus = sum(k * m.alphas_r_corr[direction][1] for m, k in zip(mechs, ks))
        A_l_plus = sum(k * m.alphas[(direction, Side.LEFT)][0] for m, k in zip(mechs, ks))
        A_l_minus = sum(k * m.alphas[(direction, Side.LEFT)][1] for m, k in zip(mechs, ks))

        def best_periodisation(ap, am):
            best, best_l = math.inf, None
            for j, l in enumerate(lam):
                try:
                    v = periodisation_bound(ap[j], am[j], g.L, l, self.tilt_)
                except Degenerate:
                    continue
                if v < best:
                    best, best_l = v, l
            return best, best_l

        per_r, lam_pr = best_periodisation(A_r_plus, A_r_minus)
        per_l, lam_pl = best_periodisation(A_l_plus, A_l_minus)

        def truncation(side, alpha_key):
            excl = [m.plds[(direction, side)].excluded_mass for m in mechs]
            if not any(e > 0 for e in excl):
                return 0.0
            amax_p = np.max([alpha_key(m)[0] for m in mechs], axis=0)
            amax_m = np.max([alpha_key(m)[1] for m in mechs], axis=0)
            tb = min(truncation_bound(amax_p[j], amax_m[j], k_tot, g.L, l, self.tilt_) for j, l in enumerate(lam))
            return tb + math.fsum(k * e for k, e in zip(ks, excl))

        t_r = truncation(Side.RIGHT, lambda m: m.alphas_r_corr[direction])
        t_l = truncation(Side.LEFT, lambda m: m.alphas[(direction, Side.LEFT)])

        # discretisation: delta^R - delta^L on the unwrapped grid
        if all(m.exact.get(direction, False) for m in mechs):
            return {
                "per_r": per_r, "per_l": per_l, "t_r": t_r, "t_l": t_l, "disc": 0.0,
                "lambda_periodisation": lam_pr if lam_pr is not None else float("nan"),
                "lambda_discretisation": float("nan"),
            }
        cont = [(m, k) for m, k in zip(mechs, ks) if m.spec.majorant]
        disc_only = [(m, k) for m, k in zip(mechs, ks) if not m.spec.majorant]
        term1 = 0.0
        if cont:
            k_c = sum(k for _, k in cont)
            a_rc = sum(k * m.alphas[(direction, Side.RIGHT)][0] for m, k in cont)
            a_lc = sum(k * m.alphas[(direction, Side.LEFT)][0] for m, k in cont) + k_c * lam * g.dx
            a_rd = sum((k * m.alphas[(direction, Side.RIGHT)][0] for m, k in disc_only), np.zeros_like(lam))
            with np.errstate(over="ignore", invalid="ignore"):
                # e^{a_rd - lam eps} (e^{a_rc} - e^{a_lc}), formed without cancellation blowup
                gap = -np.expm1(np.minimum(a_lc - a_rc, 0.0))
                vals = np.exp(a_rd + a_rc - lam * eps) * gap
            vals = vals[np.isfinite(vals)]
            log_mass_r = math.fsum(k * math.log(m.plds[(direction, Side.RIGHT)].total_mass) for m, k in cont)
            log_mass_l = math.fsum(k * math.log(max(m.plds[(direction, Side.LEFT)].total_mass, 1e-300)) for m, k in cont)
            cap1 = math.exp(min(log_mass_r, 700.0)) - math.exp(min(log_mass_l, 700.0))
            term1 = min([max(cap1, 0.0)] + [float(v) for v in vals])
        log_cap2 = math.fsum(k * math.log(max(m.plds[(direction, Side.LEFT)].total_mass, 1e-300)) for m, k in zip(mechs, ks))
        with np.errstate(over="ignore"):
            chern = A_r_plus - lam * eps
        j_best = int(np.argmin(chern))
        term2 = k_tot * g.dx * min(math.exp(min(log_cap2, 700.0)), math.exp(min(float(chern[j_best]), 700.0)))
        # tuples touching mass the LEFT side dropped or moved
        term3 = math.fsum(k * m.plds[(direction, Side.LEFT)].excluded_mass for m, k in zip(mechs, ks))
        return {
            "per_r": per_r, "per_l": per_l, "t_r": t_r, "t_l": t_l,
            "disc": term1 + term2 + term3,
            "lambda_periodisation": lam_pr if lam_pr is not None else float("nan"),
            "lambda_discretisation": float(lam[j_best]),
        }

    def _assemble(self, eps: float, est_r: dict, est_l: dict, slack_r: dict, slack_l: dict, scale: int = 1) -> DeltaBound:
        per_dir = {}
        for d in self.directions_:
            parts = self._budget_parts(d, eps, scale)
            up = est_r[d] + parts["per_r"] + parts["t_r"] + slack_r[d]
            if d in est_l:
                lo = est_l[d] - parts["per_l"] - parts["t_l"] - slack_l[d]
            else:
                lo = 0.0
            per_dir[d] = (up, lo, est_r[d], parts, slack_r[d] + slack_l.get(d, 0.0))
        d_up = max(per_dir, key=lambda d: per_dir[d][0])
        estimate = max(est_r.values())
        upper = min(max(per_dir[d_up][0], estimate), 1.0)
        lower = max(max(v[1] for v in per_dir.values()), 0.0)
        lower = min(lower, estimate)
        budget = ErrorBudget(
            periodisation=max(2.0 * (v[3]["per_r"] + v[3]["per_l"]) for v in per_dir.values()),
            truncation=max(v[3]["t_r"] + v[3]["t_l"] for v in per_dir.values()),
            discretisation=max(v[3]["disc"] for v in per_dir.values()),
            fft_clamp_slack=max(v[4] for v in per_dir.values()),
            lambda_used={
                "periodisation": per_dir[d_up][3]["lambda_periodisation"],
                "discretisation": per_dir[d_up][3]["lambda_discretisation"],
            },
        )
        return DeltaBound(eps, estimate, upper, lower, budget, d_up,
                          {d: {"upper": v[0], "lower": v[1], "estimate": v[2]} for d, v in per_dir.items()})

    # ---- queries

    def delta(self, eps: float) -> DeltaBound:
        """Certified bounds on delta(eps) for the fitted composition."""
        self._check_fitted()
        eps = float(eps)
        if not eps >= 0:
            raise BadParameter(f"epsilon must be nonnegative, got {eps!r}")
        est_r, est_l, sl_r, sl_l = {}, {}, {}, {}
        for d in self.directions_:
            c = self.composed(d, Side.RIGHT)
            est_r[d] = delta_estimate(c, eps)
            sl_r[d] = c.fft_clamp_slack
            if Side.LEFT in self._sides:
                c = self.composed(d, Side.LEFT)
                est_l[d] = delta_estimate(c, eps)
                sl_l[d] = c.fft_clamp_slack
        return self._assemble(eps, est_r, est_l, sl_r, sl_l)

    def deltas(self, eps_list: Iterable[float], threads: int = 1) -> list[DeltaBound]:
        eps_list = list(eps_list)
        self._check_fitted()
        for d in self.directions_:  # compose once before fanning out
            for s in self._sides:
                self.composed(d, s)
        if threads <= 1 or len(eps_list) < 2:
            return [self.delta(e) for e in eps_list]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(self.delta, eps_list))

    def epsilon(self, target_delta: float, tol: float = EPS_TOL, max_iter: int = EPS_MAX_ITER) -> float:
        """Smallest eps (up to ``tol``, rounded up) whose certified upper delta <= target."""
        self._check_fitted()
        if not 0.0 < target_delta < 1.0:
            raise BadParameter(f"target delta must lie in (0, 1), got {target_delta!r}")
        if self.delta(0.0).upper <= target_delta:
            return 0.0
        hi = self.grid_.L - self.grid_.dx
        if self.delta(hi).upper > target_delta:
            raise TargetUnreachable(
                f"delta upper bound at eps = L - dx = {hi:.4g} still exceeds {target_delta:g}; widen the window"
            )
        lo = 0.0
        for _ in range(max_iter):
            if hi - lo <= tol:
                break
            mid = 0.5 * (lo + hi)
            if self.delta(mid).upper > target_delta:
                lo = mid
            else:
                hi = mid
        return hi

    def sweep(self, k_list: Sequence[int], eps: float, timings: list | None = None) -> list[DeltaBound]:
        """Bounds for the plan with every count multiplied by each ``k``.

        Keeps a running spectrum product per (direction, side) and evaluates
        each delta with the frequency-domain inner product, so an increment
        of ``k`` costs O(n) instead of an inverse transform. ``timings``, if
        given, receives the wall time in ms of each update.
        """
        self._check_fitted()
        ks = [int(k) for k in k_list]
        if not ks or ks[0] < 1 or any(b <= a for a, b in zip(ks, ks[1:])):
            raise BadParameter("k_list must be strictly ascending positive integers")
        g = self.grid_
        n = g.n
        t = self.tilt_
        w = tail_weights(g, eps)
        if t:
            # the running products are tilted; fold the untilt into the weights
            i0 = _first_above(g, eps)
            w[i0:] *= np.exp(-t * g.point(np.arange(i0, n)))
        w_spec = spectral.pld_spectrum(w)
        del w
        w_norm2 = spectral.inner_product_real(w_spec, w_spec)
        states = {}
        for d in self.directions_:
            for side in self._sides:
                plan = self.plan(d, side)
                key = tuple(id(p) for p, _ in plan.entries)
                shared = next((s for s in states.values() if s["key"] == key), None)
                if shared is not None:
                    states[(d, side)] = shared
                    continue
                base, log_total = _composed_spectrum(plan, t)
                if log_total * ks[-1] > _LOG_TILT_MAX:
                    raise BadParameter(f"tilt {t:g} overflows the sweep at k = {ks[-1]}; use a smaller tilt")
                inf1, _, _ = _composed_meta(plan)
                states[(d, side)] = {"key": key, "base": base, "run": None, "k": 0, "keep1": 1.0 - inf1}
        out = []
        for k in ks:
            t0 = time.perf_counter()
            est_r, est_l, sl_r, sl_l = {}, {}, {}, {}
            done = set()
            for (d, side), st in states.items():
                if id(st) not in done:
                    _advance(st, k)
                    st["delta"] = plancherel_delta(st["run"], w_spec, n, w_norm2)
                    done.add(id(st))
                inf_mass = 1.0 - st["keep1"] ** k
                val = inf_mass + st["delta"]
                if side is Side.RIGHT:
                    est_r[d], sl_r[d] = val, 0.0
                else:
                    est_l[d], sl_l[d] = val, 0.0
            bound = self._assemble(eps, est_r, est_l, sl_r, sl_l, scale=k)
            if timings is not None:
                timings.append(1e3 * (time.perf_counter() - t0))
            out.append(bound)
        return out


def _advance(state: dict, k: int) -> None:
    """Bring the running spectrum product from its current k to ``k``."""
    step = k - state["k"]
    if state["run"] is None:
        run = state["base"].copy()
        spectral.power_inplace(run, step)
        state["run"] = run
    elif step <= 4:
        for _ in range(step):
            state["run"] *= state["base"]
    else:
        inc = state["base"].copy()
        spectral.power_inplace(inc, step)
        state["run"] *= inc
    state["k"] = k


# ---------------------------------------------------------------- functional API


def _fitted(mechanisms, grid: Grid | None, eta: float | None, sides=("right", "left"), lambdas=None):
    if grid is None and eta is None:
        raise BadParameter("give a grid or eta")
    return FourierAccountant(grid=grid, eta=eta, sides=sides, lambdas=lambdas).fit(mechanisms)


def delta_upper(mechanisms, eps: float, grid: Grid | None = None, eta: float | None = None, lambdas=None) -> DeltaBound:
    """Certified bounds on delta(eps); ``.upper`` is the certified upper bound."""
    return _fitted(mechanisms, grid, eta, lambdas=lambdas).delta(eps)


def delta_lower(mechanisms, eps: float, grid: Grid | None = None, eta: float | None = None, lambdas=None) -> DeltaBound:
    """Same computation as :func:`delta_upper`; ``.lower`` is the certified lower bound."""
    return _fitted(mechanisms, grid, eta, lambdas=lambdas).delta(eps)


def sweep_compositions(mechanisms, k_list, eps: float, grid: Grid | None = None, eta: float | None = None,
                       lambdas=None) -> list[DeltaBound]:
    return _fitted(mechanisms, grid, eta, lambdas=lambdas).sweep(k_list, eps)


def epsilon_for_delta(mechanisms, target_delta: float, grid: Grid | None = None, eta: float | None = None,
                      tol: float = EPS_TOL, lambdas=None) -> float:
    return _fitted(mechanisms, grid, eta, lambdas=lambdas).epsilon(target_delta, tol)
