"""Privacy loss distributions: exact atomic form, grid snapping and log-MGFs."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import BadParameter, EmptyPld, NegativeMass, NonNormalized, OutOfWindow

NORMALIZATION_TOL = 1e-10


class Direction(enum.Enum):
    X_OVER_Y = "x_over_y"
    Y_OVER_X = "y_over_x"

    def swapped(self) -> "Direction":
        return Direction.Y_OVER_X if self is Direction.X_OVER_Y else Direction.X_OVER_Y


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    EXACT = "exact"


class Sign(enum.IntEnum):
    PLUS = 1
    MINUS = -1


def _next_pow2(n: int) -> int:
    return 1 << max(1, int(n - 1).bit_length())


@dataclass(frozen=True)
class Grid:
    """Equidistant window ``[-L, L)`` with ``n`` points ``x_i = -L + i*dx``.

    ``n`` is rounded up to the next power of two; the value the caller asked
    for is kept in ``requested_n``.
    """

    L: float
    n: int
    requested_n: int | None = field(default=None, compare=False)

    def __post_init__(self):
        L = float(self.L)
        if not (L > 0 and math.isfinite(L)):
            raise BadParameter(f"grid half-width L must be positive and finite, got {self.L!r}")
        n_req = int(self.n)
        if n_req < 2:
            raise BadParameter(f"grid needs at least 2 points, got {self.n!r}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "n", _next_pow2(n_req))
        if self.requested_n is None:
            object.__setattr__(self, "requested_n", n_req)

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    def points(self) -> np.ndarray:
        return -self.L + np.arange(self.n) * self.dx

    def point(self, i) -> float:
        return -self.L + i * self.dx


@dataclass(frozen=True, eq=False)
class RawPld:
    """Exact discrete PLD: atoms ``(losses[i], masses[i])`` plus the mass at +inf.

    Constructors for continuous-majorant PLDs may produce atoms whose total
    mass exceeds the probability mass they stand for.
    """

    losses: np.ndarray
    masses: np.ndarray
    infinity_mass: float = 0.0
    direction: Direction = Direction.X_OVER_Y
    outcomes: tuple | None = None

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=float).ravel()
        masses = np.asarray(self.masses, dtype=float).ravel()
        if losses.shape != masses.shape:
            raise BadParameter("losses and masses must have the same length")
        if np.any(masses < 0):
            raise NegativeMass("atom masses must be nonnegative")
        if not np.all(np.isfinite(losses)):
            raise BadParameter("atom losses must be finite; use infinity_mass for +inf")
        inf_mass = float(self.infinity_mass)
        if not 0.0 <= inf_mass <= 1.0:
            raise BadParameter(f"infinity_mass must lie in [0, 1], got {inf_mass}")
        losses.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "infinity_mass", inf_mass)

    @property
    def total_mass(self) -> float:
        return float(math.fsum(self.masses))

    def mirrored(self) -> "RawPld":
        """Same atoms with negated losses."""
        return RawPld(-self.losses, self.masses, self.infinity_mass, self.direction, self.outcomes)


@dataclass(frozen=True, eq=False)
class DiscretePld:
    """PLD living on a :class:`Grid`; ``masses[i]`` sits at ``grid.point(i)``.

    ``excluded_mass`` is mass that was moved to a window edge (clamp policy)
    or left out of the window altogether (continuous constructors). Any
    certified bound built on this PLD has to pay for it. ``fft_clamp_slack``
    is the total magnitude of round-off negatives zeroed after an inverse FFT.
    """

    grid: Grid
    masses: np.ndarray
    infinity_mass: float = 0.0
    side: Side = Side.RIGHT
    excluded_mass: float = 0.0
    fft_clamp_slack: float = 0.0
    _alpha_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        if masses.shape != (self.grid.n,):
            raise BadParameter(f"expected {self.grid.n} grid masses, got shape {masses.shape}")
        if np.any(masses < 0):
            raise NegativeMass("grid masses must be nonnegative")
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "infinity_mass", float(self.infinity_mass))
        object.__setattr__(self, "excluded_mass", float(self.excluded_mass))
        object.__setattr__(self, "fft_clamp_slack", float(self.fft_clamp_slack))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))

    def nonzero_atoms(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.flatnonzero(self.masses)
        return self.grid.point(idx), self.masses[idx]


def _check_pmf(p: Mapping[Hashable, float], name: str) -> None:
    vals = np.fromiter(p.values(), dtype=float, count=len(p))
    if np.any(vals < 0):
        raise NegativeMass(f"{name} has a negative probability")
    total = math.fsum(vals)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NonNormalized(f"{name} sums to {total!r}, not 1")


def pld_from_log_pmfs(
    outcomes: Sequence[Hashable],
    log_px: np.ndarray,
    log_py: np.ndarray,
    direction: Direction = Direction.X_OVER_Y,
) -> RawPld:
    """PLD of two aligned log-pmfs; ``-inf`` marks a zero probability.

    Losses are differences of log-probabilities, so pmfs with entries far
    below the float range of a ratio are handled exactly.
    """
    log_px = np.asarray(log_px, dtype=float)
    log_py = np.asarray(log_py, dtype=float)
    if direction is Direction.Y_OVER_X:
        log_px, log_py = log_py, log_px
    finite_x = np.isfinite(log_px)
    shared = finite_x & np.isfinite(log_py)
    only_x = finite_x & ~np.isfinite(log_py)
    inf_mass = math.fsum(np.exp(log_px[only_x])) if only_x.any() else 0.0
    keep = np.flatnonzero(shared)
    masses = np.exp(log_px[keep])
    losses = log_px[keep] - log_py[keep]
    nz = masses > 0
    kept_outcomes = tuple(outcomes[i] for i in keep[nz])
    return RawPld(losses[nz], masses[nz], min(inf_mass, 1.0), direction, kept_outcomes)


def pld_from_distributions(
    px: Mapping[Hashable, float],
    py: Mapping[Hashable, float],
    direction: Direction = Direction.X_OVER_Y,
) -> RawPld:
    """PLD of two discrete probability maps keyed by outcome.

    Outcomes are matched by exact key equality. ``direction=Y_OVER_X`` swaps
    the roles of the two maps.
    """
    _check_pmf(px, "pX")
    _check_pmf(py, "pY")
    outcomes = list(dict.fromkeys(list(px) + list(py)))
    with np.errstate(divide="ignore"):
        log_px = np.log(np.array([px.get(o, 0.0) for o in outcomes], dtype=float))
        log_py = np.log(np.array([py.get(o, 0.0) for o in outcomes], dtype=float))
    return pld_from_log_pmfs(outcomes, log_px, log_py, direction)


# atoms this many ulps (of max(L, |s|)) from a grid point are taken to sit on it
SNAP_ULPS = 4


def _snap_indices(losses: np.ndarray, grid: Grid, side: Side) -> np.ndarray:
    pos = (losses + grid.L) / grid.dx
    near = np.rint(pos)
    tol = SNAP_ULPS * np.finfo(float).eps * np.maximum(grid.L, np.abs(losses))
    on_grid = np.abs(grid.point(near) - losses) <= tol
    if side is Side.LEFT:
        idx = np.floor(pos).astype(np.int64)
        # division can be off by an ulp; enforce x[idx] <= s < x[idx + 1]
        idx -= grid.point(idx) > losses
        idx += grid.point(idx + 1) <= losses
    else:
        idx = np.ceil(pos).astype(np.int64)
        idx += grid.point(idx) < losses
        idx -= grid.point(idx - 1) >= losses
    return np.where(on_grid, near.astype(np.int64), idx)


def discretize(raw: RawPld, grid: Grid, side: Side = Side.RIGHT, policy: str = "strict") -> DiscretePld:
    """Snap every atom to the grid point below (LEFT) or above (RIGHT) it.

    ``policy="strict"`` rejects atoms outside ``[-L, L - dx]``;
    ``policy="clamp"`` moves them to the nearest window edge and records the
    moved mass in ``excluded_mass``.
    """
    if side is Side.EXACT:
        raise BadParameter("discretize produces LEFT or RIGHT approximations")
    if policy not in ("strict", "clamp"):
        raise BadParameter(f"unknown out-of-window policy {policy!r}")
    losses, masses = raw.losses, raw.masses
    lo, hi = grid.point(0), grid.point(grid.n - 1)
    outside = (losses < lo) | (losses > hi)
    moved = 0.0
    if outside.any():
        if policy == "strict":
            raise OutOfWindow(float(losses[np.argmax(outside)]))
        moved = math.fsum(masses[outside])
    idx = np.clip(_snap_indices(losses, grid, side), 0, grid.n - 1)
    grid_masses = np.bincount(idx, weights=masses, minlength=grid.n)
    return DiscretePld(grid, grid_masses, raw.infinity_mass, side, moved)


def _atoms(pld: RawPld | DiscretePld) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pld, DiscretePld):
        return pld.nonzero_atoms()
    keep = pld.masses > 0
    return pld.losses[keep], pld.masses[keep]


def log_mgf(pld: RawPld | DiscretePld, lam: float, sign: Sign = Sign.PLUS) -> float:
    """``log sum_i a_i exp(sign * lam * s_i)`` over the finite atoms.

    The infinity mass is not part of the sum. Evaluated with log-sum-exp so
    large ``lam * s`` does not overflow.
    """
    if not lam > 0:
        raise BadParameter(f"lambda must be positive, got {lam!r}")
    sign = Sign(sign)
    if isinstance(pld, DiscretePld):
        key = (float(lam), int(sign))
        cached = pld._alpha_cache.get(key)
        if cached is not None:
            return cached
    losses, masses = _atoms(pld)
    if masses.size == 0:
        raise EmptyPld("PLD has no finite mass")
    value = float(logsumexp(int(sign) * lam * losses, b=masses))
    if isinstance(pld, DiscretePld):
        pld._alpha_cache.setdefault(key, value)
    return value
