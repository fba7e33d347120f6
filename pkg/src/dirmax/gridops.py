"""Maximal operators and Fourier multipliers on periodic square grids.

Arrays are indexed ``samples[i1, i2]`` with ``x1 = i1 * L/n`` and
``x2 = i2 * L/n``.  Frequencies are ``xi = 2*pi*k/L`` with ``k`` in
``(-n/2, n/2)``; the Nyquist bins ``k = -n/2`` have no well-defined sign and
every multiplier here sets them to zero.

Frequency sectors are cones ``{(xi1, xi2) : lo <= -xi1/xi2 <= hi}``.  The
minus sign puts the cone where the transform of a kernel elongated along
slope ``t`` in space lives: such a kernel depends on ``x2 - t x1`` and its
transform concentrates on ``xi1 + t xi2 = 0``.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from numba import njit

from .kernels import KernelParams, psi_hat, window_phi_hat

MAGIC = b"DMAXGRD1"


class GridFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on an ``n x n`` periodic grid of side length ``L``."""

    samples: np.ndarray
    L: float = None

    def __post_init__(self):
        a = np.array(self.samples, dtype=np.float64, order="C")
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("samples must form a square array")
        n = a.shape[0]
        if n < 16 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 16, got {n}")
        if not np.all(np.isfinite(a)):
            raise ValueError("samples must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)
        L = float(n) if self.L is None else float(self.L)
        if not L > 0:
            raise ValueError("side length must be positive")
        object.__setattr__(self, "L", L)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def spacing(self) -> float:
        return self.L / self.n

    def like(self, samples) -> "GridFunction":
        return GridFunction(samples, self.L)

    def norm(self) -> float:
        """Discrete L2 norm, ``sqrt(sum |f|^2 * spacing^2)``."""
        return float(np.sqrt(np.sum(self.samples ** 2)) * self.spacing)

    # -- DMG1 binary format -------------------------------------------------

    def to_bytes(self) -> bytes:
        head = MAGIC + struct.pack("<Id", self.n, self.L)
        return head + self.samples.astype("<f8").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        if len(data) < 20 or data[:8] != MAGIC:
            raise GridFormatError("not a DMG1 grid (bad magic)")
        n, L = struct.unpack("<Id", data[8:20])
        body = data[20:]
        if len(body) != 8 * n * n:
            raise GridFormatError(f"DMG1 body has {len(body)} bytes, expected {8 * n * n}")
        a = np.frombuffer(body, dtype="<f8").reshape(n, n)
        try:
            return cls(a.astype(np.float64), L)
        except ValueError as exc:
            raise GridFormatError(str(exc)) from exc

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "GridFunction":
        return cls.from_bytes(Path(path).read_bytes())

    def to_pgm(self) -> bytes:
        """8-bit binary PGM of the samples, linearly normalized to [0, 255]."""
        a = self.samples
        lo, hi = float(a.min()), float(a.max())
        scaled = np.zeros_like(a) if hi == lo else (a - lo) / (hi - lo)
        img = np.round(scaled * 255).astype(np.uint8)
        return f"P5\n{self.n} {self.n}\n255\n".encode() + img.tobytes()


# -- scale lattices -------------------------------------------------------------

def dyadic_scales(n: int, thin: bool = False):
    """Half-widths ``{1, 2, 4, ..., n/4}`` in both axes, as ``(d1, d2)`` pairs.

    With ``thin=True`` only pairs with ``d2 <= d1`` are kept.
    """
    ds = []
    d = 1
    while d <= n // 4:
        ds.append(d)
        d *= 2
    return [(a, b) for a in ds for b in ds if not thin or b <= a]


def wide_scales(n: int):
    """Dyadic half-widths plus the half period ``(n-1)//2`` in both axes.

    On a periodic grid the half period is the largest window that does not
    wrap onto itself; including it lets every point see every other point.
    """
    ds = sorted({d for d, _ in dyadic_scales(n)} | {(n - 1) // 2})
    return [(a, b) for a in ds for b in ds]


def parse_scales(spec: str, n: int):
    """Parse ``"dyadic"``, ``"thin"``, ``"wide"`` or ``"d1xd2,d1xd2,..."``."""
    if spec in ("dyadic", "full"):
        return dyadic_scales(n)
    if spec == "thin":
        return dyadic_scales(n, thin=True)
    if spec == "wide":
        return wide_scales(n)
    out = []
    for item in spec.split(","):
        a, b = item.lower().split("x")
        out.append((int(a), int(b)))
    return out


def _clip_scales(scales, n: int):
    scales = [(int(a), int(b)) for a, b in scales]
    if not scales:
        raise ValueError("scale list is empty")
    if any(a < 1 or b < 1 for a, b in scales):
        raise ValueError("half-widths must be at least 1")
    cap = (n - 1) // 2
    if any(a > cap or b > cap for a, b in scales):
        warnings.warn(f"half-widths above {cap} clipped for n={n}", stacklevel=3)
        scales = [(min(a, cap), min(b, cap)) for a, b in scales]
    return sorted(set(scales))


def shear_offsets(alpha: float, dmax: int) -> np.ndarray:
    """Row offsets ``round(i * alpha)`` for ``i = 0..dmax``, ties to even."""
    return np.rint(np.arange(dmax + 1) * float(alpha)).astype(np.int64)


# -- numba kernels --------------------------------------------------------------

@njit(cache=True)
def _sheared_sums(Ap, n, P, Q, s, checks, out):
    # out[c, x1, x2] = sum_{|i| <= checks[c]} A(x1 + i, x2 + s(i)), s(-i) = -s(i)
    acc = np.empty(n)
    for x1 in range(n):
        row = Ap[x1 + P]
        for x2 in range(n):
            acc[x2] = row[x2 + Q]
        c = 0
        for i in range(1, checks[-1] + 1):
            ra = Ap[x1 + P + i]
            rb = Ap[x1 + P - i]
            oa = Q + s[i]
            ob = Q - s[i]
            for x2 in range(n):
                acc[x2] += ra[x2 + oa] + rb[x2 + ob]
            if i == checks[c]:
                out[c, x1, :] = acc
                c += 1
    return out


@njit(cache=True)
def _vertical_max(H, d2s, counts, lev, offs, starts, out):
    # For each row: dyadic block sums of the periodic extension, then the
    # centred windows of half-width d2s[t] assembled from blocks
    # lev/offs[starts[t]:starts[t+1]].  Only additions, so sums of
    # nonnegative data stay nonnegative and integer data stays exact.
    n = H.shape[1]
    pad = d2s.max()
    m = n + 2 * pad + 1
    nlev = lev.max() + 1
    blk = np.empty((nlev, m))
    for x1 in range(H.shape[0]):
        row = H[x1]
        for j in range(m):
            blk[0, j] = row[(j - pad) % n]
        w = 1
        for b in range(1, nlev):
            for j in range(m - 2 * w + 1):
                blk[b, j] = blk[b - 1, j] + blk[b - 1, j + w]
            w *= 2
        for t in range(d2s.shape[0]):
            base = pad - d2s[t]
            c = counts[t]
            for x2 in range(n):
                total = 0.0
                for q in range(starts[t], starts[t + 1]):
                    total += blk[lev[q], x2 + base + offs[q]]
                v = total / c
                if v > out[x1, x2]:
                    out[x1, x2] = v
    return out


def _padded(A, P, Q):
    return np.pad(A, ((P, P), (Q, Q)), mode="wrap")


def _parallelogram_max_abs(A, alpha, scales, out):
    """Accumulate the parallelogram maximal function of ``A >= 0`` into ``out``."""
    n = A.shape[0]
    d1s = sorted({a for a, _ in scales})
    dmax = d1s[-1]
    s = shear_offsets(alpha, dmax)
    P = dmax
    Q = int(s[-1])
    Ap = _padded(A, P, Q)
    checks = np.array(d1s, dtype=np.int64)
    H = np.empty((len(d1s), n, n))
    _sheared_sums(Ap, n, P, Q, s, checks, H)
    for c, d1 in enumerate(d1s):
        d2s = sorted(b for a, b in scales if a == d1)
        lev, offs, starts = [], [], [0]
        for d2 in d2s:
            length, off = 2 * d2 + 1, 0
            for b in range(length.bit_length() - 1, -1, -1):
                if length - off >= 1 << b:
                    lev.append(b)
                    offs.append(off)
                    off += 1 << b
            starts.append(len(lev))
        counts = np.array([(2 * d1 + 1) * (2 * d2 + 1) for d2 in d2s], dtype=np.float64)
        _vertical_max(H[c], np.array(d2s, dtype=np.int64), counts,
                      np.array(lev, dtype=np.int64), np.array(offs, dtype=np.int64),
                      np.array(starts, dtype=np.int64), out)
    return out


def parallelogram_max(f: GridFunction, alpha: float, scales=None) -> GridFunction:
    """Maximal average of ``|f|`` over sheared windows through each point.

    The window with half-widths ``(d1, d2)`` at ``(x1, x2)`` is
    ``{(x1 + i, x2 + round(i * alpha) + j) : |i| <= d1, |j| <= d2}`` with
    periodic wrap; the result is the maximum over ``scales`` of the mean of
    ``|f|`` over that window.
    """
    n = f.n
    scales = _clip_scales(dyadic_scales(n) if scales is None else scales, n)
    out = np.zeros((n, n))
    _parallelogram_max_abs(np.abs(f.samples), alpha, scales, out)
    return f.like(out)


def strong_max(f: GridFunction, scales=None) -> GridFunction:
    """Axis-parallel maximal function (the ``alpha = 0`` case)."""
    return parallelogram_max(f, 0.0, scales)


def directional_max(f: GridFunction, omega: Iterable[float], scales=None) -> GridFunction:
    """Pointwise maximum of :func:`parallelogram_max` over the slopes in ``omega``."""
    omega = list(omega)
    if not omega:
        raise ValueError("direction set is empty")
    n = f.n
    scales = _clip_scales(dyadic_scales(n) if scales is None else scales, n)
    A = np.abs(f.samples)
    out = np.zeros((n, n))
    for alpha in omega:
        _parallelogram_max_abs(A, alpha, scales, out)
    return f.like(out)


# -- Fourier side ---------------------------------------------------------------

def frequencies(n: int, L: float):
    """Angular frequency grids ``(xi1, xi2)`` for ``rfft2`` layout, Nyquist mask."""
    k1 = np.fft.fftfreq(n, 1.0 / n)
    k2 = np.fft.rfftfreq(n, 1.0 / n)
    xi1 = (2.0 * math.pi / L) * k1[:, None]
    xi2 = (2.0 * math.pi / L) * k2[None, :]
    keep = (np.abs(k1)[:, None] < n / 2) & (k2[None, :] < n / 2)
    return xi1, xi2, keep


def apply_symbol(f: GridFunction, symbol: np.ndarray) -> GridFunction:
    """Multiply ``rfft2(f)`` by a real symbol given on the ``rfft2`` grid."""
    F = np.fft.rfft2(f.samples)
    out = np.fft.irfft2(F * symbol, s=f.samples.shape)
    return f.like(out)


def gamma_symbol(n: int, L: float, r: float, R: float, h: float, alpha: float) -> np.ndarray:
    """``phi^(h (xi1 + alpha xi2)) * psi^_{r,R}(xi2)`` on the ``rfft2`` grid.

    Accepts any band ``0 <= r <= R``; Nyquist bins are zero.
    """
    xi1, xi2, keep = frequencies(n, L)
    nyq = math.pi * n / L
    if 2.0 * R > nyq:
        warnings.warn(f"band edge 2R={2 * R:.4g} beyond Nyquist {nyq:.4g}; symbol truncated",
                      stacklevel=2)
    sym = window_phi_hat(h)(xi1 + alpha * xi2) * psi_hat(r, R)(xi2)
    return np.where(keep, sym, 0.0)


def gamma_apply(f: GridFunction, p: KernelParams) -> GridFunction:
    """Apply ``Gamma^alpha_{r,R,h}`` through its Fourier symbol."""
    return apply_symbol(f, gamma_symbol(f.n, f.L, p.r, p.R, p.h, p.alpha))


def gamma_kernel(p: KernelParams, x1, x2):
    """Spatial kernel of :func:`gamma_apply`, ``psi(x2 - alpha x1) phi_h(x1) / (2 pi)``."""
    from .kernels import psi, window_phi
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return psi(p.r, p.R, x2 - p.alpha * x1) * window_phi(p.h, x1) / (2.0 * math.pi)


@dataclass(frozen=True)
class SlopeInterval:
    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.a < self.b < 1.0):
            raise ValueError(f"need 0 < a < b < 1, got [{self.a!r}, {self.b!r}]")

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class Sector:
    """Frequency cone ``lo <= -xi1/xi2 <= hi``, possibly a doubled interval.

    ``interval`` is the source slope interval, ``doubled`` says whether the
    bounds were widened from it, ``clipped`` records a clip to ``[0, 1]``.
    ``axis`` is the bisecting angle when it was fixed by construction.
    """

    lo: float
    hi: float
    interval: SlopeInterval = None
    doubled: bool = False
    clipped: bool = False
    axis: float = None

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"degenerate sector [{self.lo!r}, {self.hi!r}]")

    @classmethod
    def of(cls, j: SlopeInterval) -> "Sector":
        return cls(j.a, j.b, j, False, False, _axis(j.a, j.b))

    @property
    def bisectrix(self) -> float:
        """Bisecting angle of the cone, in the slope-to-angle chart ``atan``."""
        return _axis(self.lo, self.hi) if self.axis is None else self.axis

    def contains(self, slope, tol: float = 0.0):
        slope = np.asarray(slope, dtype=float)
        return (slope >= self.lo - tol) & (slope <= self.hi + tol)


def _axis(a, b):
    return 0.5 * (math.atan(a) + math.atan(b))


def sector_double(j: SlopeInterval, mode: str = "angle") -> Sector:
    """The sector with the same bisectrix as ``S(j)`` and twice its width.

    ``mode="angle"`` doubles the opening angle and clips the result to slopes
    in ``[0, 1]``.  ``mode="slope"`` doubles the slope interval about its
    midpoint, ``[a - |j|/2, b + |j|/2]``, without clipping; this is the
    version that contains the frequency support of the band pieces built in
    :mod:`dirmax.verify`.
    """
    if mode == "angle":
        ta, tb = math.atan(j.a), math.atan(j.b)
        mid, half = _axis(j.a, j.b), 0.5 * (tb - ta)
        lo, hi = math.tan(mid - 2.0 * half), math.tan(mid + 2.0 * half)
        clipped = lo < 0.0 or hi > 1.0
        return Sector(max(lo, 0.0), min(hi, 1.0), j, True, clipped, mid)
    if mode == "slope":
        w = 0.5 * j.length
        return Sector(j.a - w, j.b + w, j, True, False, None)
    raise ValueError(f"unknown doubling mode {mode!r}")


def sector_mask(n: int, L: float, s: Sector, complement: bool = False) -> np.ndarray:
    """0/1 multiplier of the sector on the ``rfft2`` grid; DC is always kept.

    Frequencies on the axis ``xi2 = 0`` belong to no sector; Nyquist bins are
    dropped from both the sector and its complement.
    """
    t, keep = frequency_slopes(n, L)
    inside = np.isfinite(t) & (t >= s.lo) & (t <= s.hi)
    mask = (~inside if complement else inside) & keep
    mask[0, 0] = True
    return mask.astype(float)


def sector_project(f: GridFunction, s: Sector, complement: bool = False) -> GridFunction:
    """Fourier projection onto the sector (or onto its complement)."""
    return apply_symbol(f, sector_mask(f.n, f.L, s, complement))


def frequency_slopes(n: int, L: float):
    """``-xi1/xi2`` on the ``rfft2`` grid (NaN where ``xi2 == 0``) and the Nyquist mask."""
    k1 = np.fft.fftfreq(n, 1.0 / n)[:, None] * np.ones((1, n // 2 + 1))
    k2 = np.ones((n, 1)) * np.fft.rfftfreq(n, 1.0 / n)[None, :]
    keep = (np.abs(k1) < n / 2) & (k2 < n / 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(k2 != 0, -k1 / np.where(k2 != 0, k2, 1.0), np.nan)
    return t, keep
