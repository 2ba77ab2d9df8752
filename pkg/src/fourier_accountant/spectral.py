"""Radix-2 DFT, the half-swap operator and periodised convolution of grid PLDs.

The kernel is an in-place iterative radix-2 transform. The forward pass is
decimation-in-frequency (natural order in, bit-reversed order out) and the
inverse pass is decimation-in-time (bit-reversed in, natural out), so the
composition pipeline never has to permute. Pointwise products and inner
products do not care about the order as long as both operands share it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BadLength, GridMismatch, NegativeMass, NonRealResult
from .grid_pld import DiscretePld, Grid

IMAG_RESIDUE_TOL = 1e-10
NEGATIVE_TOL = 1e-12

# Butterflies are applied in blocks of at most this many elements so that
# temporaries stay small even for n = 2**27.
_CHUNK = 1 << 21
# Above this size twiddles are generated per stage chunk instead of cached.
_CACHE_LIMIT = 1 << 24


def _check_length(n: int) -> None:
    if n < 2 or n & (n - 1):
        raise BadLength(f"transform length must be a power of two >= 2, got {n}")


@lru_cache(maxsize=8)
def _root_table(n: int) -> np.ndarray:
    """exp(-2*pi*i*j/n) for j < n/2; stage h uses every (n/2h)-th entry."""
    t = np.exp(-2j * np.pi * np.arange(n // 2) / n)
    t.setflags(write=False)
    return t


@lru_cache(maxsize=8)
def _bitrev(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.int64)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    rev.setflags(write=False)
    return rev


def _twiddles(n: int, h: int, c0: int, c1: int, inverse: bool) -> np.ndarray:
    if n <= _CACHE_LIMIT:
        w = _root_table(n)[c0 * (n // (2 * h)):c1 * (n // (2 * h)):n // (2 * h)]
    else:
        w = np.exp(-2j * np.pi * np.arange(c0, c1) / (2 * h))
    return np.conj(w) if inverse else w


def _stage_blocks(n: int, h: int):
    rows = max(1, _CHUNK // h)
    cols = min(h, _CHUNK)
    for c0 in range(0, h, cols):
        for r0 in range(0, n // (2 * h), rows):
            yield r0, r0 + rows, c0, c0 + cols


def _forward_inplace(a: np.ndarray) -> np.ndarray:
    """DIF transform of ``a`` in place; result is in bit-reversed order."""
    n = a.size
    h = n // 2
    while h >= 1:
        v3 = a.reshape(n // (2 * h), 2, h)
        wc = None
        for r0, r1, c0, c1 in _stage_blocks(n, h):
            if wc is None or wc[0] != c0:
                wc = (c0, _twiddles(n, h, c0, c1, False))
            u = v3[r0:r1, 0, c0:c1]
            v = v3[r0:r1, 1, c0:c1]
            t = u - v
            u += v
            np.multiply(t, wc[1], out=v)
        h //= 2
    return a


def _inverse_inplace(a: np.ndarray) -> np.ndarray:
    """DIT inverse of a bit-reversed spectrum in place, including the 1/n."""
    n = a.size
    h = 1
    while h < n:
        v3 = a.reshape(n // (2 * h), 2, h)
        wc = None
        for r0, r1, c0, c1 in _stage_blocks(n, h):
            if wc is None or wc[0] != c0:
                wc = (c0, _twiddles(n, h, c0, c1, True))
            u = v3[r0:r1, 0, c0:c1]
            v = v3[r0:r1, 1, c0:c1]
            v *= wc[1]
            t = u - v
            u += v
            v[...] = t
        h *= 2
    a *= 1.0 / n
    return a


def _chunked_absmax(x: np.ndarray) -> float:
    m = 0.0
    for i in range(0, x.size, _CHUNK):
        m = max(m, float(np.max(np.abs(x[i:i + _CHUNK]))))
    return m


def _real_part(a: np.ndarray) -> np.ndarray:
    """Real part of an inverse transform after checking the imaginary residue."""
    re = a.real
    scale = _chunked_absmax(re)
    resid = _chunked_absmax(a.imag)
    if resid > IMAG_RESIDUE_TOL * max(scale, np.finfo(float).tiny):
        raise NonRealResult(f"imaginary residue {resid:.3e} exceeds {IMAG_RESIDUE_TOL:g} x max|v| = {scale:.3e}")
    return re


def flip(v: np.ndarray) -> np.ndarray:
    """Swap the two halves of ``v`` (the operator D)."""
    v = np.asarray(v)
    n = v.shape[0]
    if n % 2:
        raise BadLength(f"flip needs an even length, got {n}")
    return np.concatenate((v[n // 2:], v[: n // 2]))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """DFT coefficients in natural order; ``grid`` is optional provenance."""

    coefficients: np.ndarray
    grid: Grid | None = None

    def __len__(self) -> int:
        return self.coefficients.size


def dft(v, grid: Grid | None = None) -> Spectrum:
    """``(F v)_k = sum_j v_j exp(-2*pi*i*k*j/n)``."""
    v = np.asarray(v)
    n = v.shape[0]
    _check_length(n)
    if grid is not None and grid.n != n:
        raise GridMismatch(f"vector length {n} does not match grid size {grid.n}")
    a = np.array(v, dtype=complex)
    _forward_inplace(a)
    return Spectrum(a[_bitrev(n)], grid)


def idft(s: Spectrum | np.ndarray) -> np.ndarray:
    """Inverse DFT with the 1/n factor; the result must be real."""
    coeff = s.coefficients if isinstance(s, Spectrum) else np.asarray(s)
    n = coeff.shape[0]
    _check_length(n)
    a = np.array(coeff, dtype=complex)[_bitrev(n)]
    _inverse_inplace(a)
    return np.array(_real_part(a))


# ---- pipeline helpers (bit-reversed spectra, no permutation) ----


def _tilt_chunks(a: np.ndarray, x_of, t: float) -> None:
    """Multiply ``a`` in place by ``exp(t * x)``, chunk by chunk."""
    for i in range(0, a.size, _CHUNK):
        j = np.arange(i, min(i + _CHUNK, a.size))
        a[i:i + j.size] *= np.exp(t * x_of(j))


def pld_spectrum(masses: np.ndarray, tilt: float = 0.0, dx: float | None = None) -> np.ndarray:
    """Bit-reversed ``F(D a)`` for a grid mass vector.

    With ``tilt = t`` the masses are first multiplied by ``e^{t x}``; ``dx``
    is then needed to place the points. Tilting commutes with convolution,
    so the composition can be untilted afterwards.
    """
    n = masses.shape[0]
    _check_length(n)
    a = np.empty(n, dtype=complex)
    h = n // 2
    a[:h] = masses[h:]
    a[h:] = masses[:h]
    if tilt:
        # after the half swap, slot j holds the point j*dx (j < n/2) or (j - n)*dx
        _tilt_chunks(a, lambda j: np.where(j < h, j, j - n) * dx, tilt)
    return _forward_inplace(a)


def spectrum_to_masses(
    spec: np.ndarray, total: float, overwrite: bool = False, upper_only: bool = False,
    tilt: float = 0.0, dx: float | None = None,
) -> tuple[np.ndarray, float]:
    """``D F^{-1}`` of a bit-reversed spectrum, clamped to nonnegative values.

    Returns the masses and the summed magnitude of the clamped round-off
    negatives. ``total`` is the expected total mass, which sets the scale of
    the tolerated negatives. With ``upper_only`` the points below zero are
    left at 0 and never written, which keeps those pages unallocated.

    A spectrum of tilted masses (see :func:`pld_spectrum`) is untilted here;
    ``total`` is then the tilted total. The result is kept for ``x >= 0``
    only, where untilting shrinks round-off instead of amplifying it, and
    the slack counts the negatives there at their untilted size.
    """
    a = spec if overwrite else spec.copy()
    _inverse_inplace(a)
    re = _real_part(a)
    n = re.size
    h = n // 2
    upper_only = upper_only or bool(tilt)
    out = np.zeros(n)
    if not upper_only:
        out[:h] = re[h:]
    out[h:] = re[:h]
    del a, re
    floor = -NEGATIVE_TOL * max(total, np.finfo(float).tiny)
    slack = 0.0
    start = 0 if not upper_only else h
    for i in range(start, n, _CHUNK):
        c = out[i:i + _CHUNK]
        worst = float(c.min())
        if worst < 0:
            if worst < floor:
                raise NegativeMass(f"inverse transform produced {worst:.3e}, below -{NEGATIVE_TOL:g} x total mass")
            neg = c < 0
            if tilt:
                x = (np.flatnonzero(neg) + (i - h)) * dx
                slack += float(-(c[neg] * np.exp(-tilt * x)).sum())
            else:
                slack += float(-c[neg].sum())
            c[neg] = 0.0
    if tilt:
        _tilt_chunks(out[h:], lambda j: j * dx, -tilt)
    return out, slack


def power_inplace(z: np.ndarray, k: int) -> np.ndarray:
    """``z**k`` elementwise by repeated squaring; overwrites ``z``.

    Works chunk by chunk so the extra memory is one chunk, not one array.
    """
    k = int(k)
    if k < 0:
        raise ValueError("negative power")
    for i in range(0, z.size, _CHUNK):
        zc = z[i:i + _CHUNK]
        if k == 0:
            zc[...] = 1.0
            continue
        base = zc.copy()
        kk = k - 1
        # zc already holds base**1; fold in the bits of k - 1
        while kk:
            if kk & 1:
                zc *= base
            kk >>= 1
            if kk:
                base *= base
    return z


def convolve_pair(p: DiscretePld, q: DiscretePld) -> DiscretePld:
    """Periodised convolution ``D F^{-1}(F(D a) * F(D b))`` of two grid PLDs."""
    if p.grid != q.grid:
        raise GridMismatch(f"grids differ: {p.grid} vs {q.grid}")
    spec = pld_spectrum(p.masses)
    spec *= pld_spectrum(q.masses)
    total = p.total_mass * q.total_mass
    masses, slack = spectrum_to_masses(spec, total, overwrite=True)
    inf_mass = 1.0 - (1.0 - p.infinity_mass) * (1.0 - q.infinity_mass)
    side = p.side if p.side == q.side else q.side
    return DiscretePld(
        p.grid,
        masses,
        inf_mass,
        side,
        p.excluded_mass + q.excluded_mass,
        p.fft_clamp_slack + q.fft_clamp_slack + slack,
    )


def inner_product(u: np.ndarray, v: np.ndarray) -> complex:
    """``<u, v>`` with conjugation on the first argument, chunked."""
    acc = 0j
    for i in range(0, u.size, _CHUNK):
        acc += complex(np.vdot(u[i:i + _CHUNK], v[i:i + _CHUNK]))
    return acc


def inner_product_real(u: np.ndarray, v: np.ndarray) -> float:
    return inner_product(u, v).real


def inner_product_imag(u: np.ndarray, v: np.ndarray) -> float:
    return inner_product(u, v).imag


def next_pow2(n: int) -> int:
    return 1 << max(1, math.ceil(math.log2(max(n, 2))))
