"""One-dimensional kernels and their Fourier symbols.

Fourier transforms follow ``f^(xi) = int f(x) exp(i x xi) dx``.  Under that
convention the Fejer kernel ``K_r`` transforms to ``2*pi*(1 - |xi|/r)_+``, so
the band kernels ``psi`` built from it carry a factor ``2*pi`` relative to
their normalized symbol profiles.  Everything that feeds a Fourier
multiplier uses the profiles directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_EPS_SCALE = 1e-8


@dataclass(frozen=True)
class SymbolProfile:
    """Even piecewise-linear function of one frequency variable.

    ``breakpoints`` lists ``(frequency, value)`` for frequency >= 0 in
    increasing order; the function is linear in between, even, and zero
    beyond the last breakpoint.
    """

    breakpoints: tuple

    def __post_init__(self):
        bp = tuple((float(f), float(v)) for f, v in self.breakpoints)
        if not bp:
            raise ValueError("profile needs at least one breakpoint")
        freqs = [f for f, _ in bp]
        if freqs[0] != 0.0 or any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("breakpoint frequencies must start at 0 and increase")
        if any(not (0.0 <= v <= 1.0) for _, v in bp):
            raise ValueError("profile values must lie in [0, 1]")
        if bp[-1][1] != 0.0:
            raise ValueError("profile must vanish at its last breakpoint")
        object.__setattr__(self, "breakpoints", bp)

    @property
    def support(self) -> float:
        return self.breakpoints[-1][0]

    def __call__(self, xi):
        f = np.array([p[0] for p in self.breakpoints])
        v = np.array([p[1] for p in self.breakpoints])
        return np.interp(np.abs(xi), f, v, right=0.0)

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self.breakpoints])

    @classmethod
    def from_json(cls, text: str) -> "SymbolProfile":
        return cls(tuple(tuple(p) for p in json.loads(text)))


@dataclass(frozen=True)
class KernelParams:
    """Parameters ``(r, R, h, alpha)`` of the operator Gamma."""

    r: float
    R: float
    h: float
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.r < self.R / 2.0):
            raise ValueError(f"need 0 <= r < R/2, got r={self.r!r}, R={self.R!r}")
        if not self.h > 0.0:
            raise ValueError("window width h must be positive")
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError("alpha must lie in [0, 1)")


def fejer(r: float, x):
    """Fejer kernel ``K_r(x) = 4 sin^2(r x / 2) / (r x^2)``, with ``K_r(0) = r``."""
    if not r > 0:
        raise ValueError("Fejer radius must be positive")
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _EPS_SCALE / r
    xs = np.where(small, 1.0, x)
    val = 4.0 * np.sin(0.5 * r * xs) ** 2 / (r * xs * xs)
    out = np.where(small, r, val)
    return out if out.ndim else float(out)


def _psi_single(c: float, x):
    if c == 0.0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return 2.0 * fejer(2.0 * c, x) - fejer(c, x)


def psi(r: float, R: float, x):
    """``psi_{r,R} = psi_R - psi_r`` with ``psi_c = 2 K_{2c} - K_c`` and ``psi_0 = 0``."""
    if not (0.0 <= r <= R and R > 0):
        raise ValueError(f"need 0 <= r <= R, R > 0; got r={r!r}, R={R!r}")
    out = _psi_single(R, x) - _psi_single(r, x)
    return out if np.ndim(out) else float(out)


def _trapezoid(c: float, xi):
    # normalized transform of psi_c: 1 on [0, c], linear to 0 on [c, 2c]
    if c == 0.0:
        return np.zeros_like(xi)
    return np.clip(2.0 - np.abs(xi) / c, 0.0, 1.0)


def psi_hat(r: float, R: float) -> SymbolProfile:
    """Normalized symbol profile of ``psi_{r,R}`` (its transform divided by 2*pi).

    Accepts any ``0 <= r <= R``; for ``r < R/2`` this is the band profile
    that is 0 up to r, rises to 1 on [r, 2r], stays 1 up to R and falls to
    0 at 2R.
    """
    if not (0.0 <= r <= R and R > 0):
        raise ValueError(f"need 0 <= r <= R, R > 0; got r={r!r}, R={R!r}")
    knots = sorted({0.0, r, 2.0 * r, R, 2.0 * R})
    xi = np.array(knots)
    vals = _trapezoid(R, xi) - _trapezoid(r, xi)
    bp = _prune([(f, float(v)) for f, v in zip(knots, vals)])
    return SymbolProfile(tuple(bp))


def _prune(bp):
    # drop interior knots where the function does not bend
    out = [bp[0]]
    for i in range(1, len(bp) - 1):
        (f0, v0), (f1, v1), (f2, v2) = out[-1], bp[i], bp[i + 1]
        if abs((v1 - v0) * (f2 - f0) - (v2 - v0) * (f1 - f0)) > 1e-15 * max(f2, 1.0):
            out.append(bp[i])
    out.append(bp[-1])
    return out


def window_phi(h: float, x):
    """Window ``phi_h(x) = phi(x/h)/h`` with ``phi(u) = sin^2(u/2) / (2 pi (u/2)^2)``.

    ``phi >= 0``, integrates to 1 and its transform is the triangle
    ``(1 - |xi|)_+``; ``phi_h`` has transform ``(1 - h|xi|)_+``.
    """
    if not h > 0:
        raise ValueError("window width must be positive")
    u = np.asarray(x, dtype=float) / h
    out = fejer(1.0, u) / (2.0 * math.pi * h)
    return out if np.ndim(out) else float(out)


def window_phi_hat(h: float) -> SymbolProfile:
    if not h > 0:
        raise ValueError("window width must be positive")
    return SymbolProfile(((0.0, 1.0), (1.0 / h, 0.0)))


# Majorant of max(phi(x), |x| phi(x)) for the unit window.  The first moment
# of this window decays only like 1/|x|, so the majorant is integrable on
# bounded ranges only: int_{-X}^{X} = (8/pi) log(1 + X).
WINDOW_MAJORANT_C = 4.0 / math.pi


def window_majorant(x):
    x = np.asarray(x, dtype=float)
    out = WINDOW_MAJORANT_C / (1.0 + np.abs(x))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ZetaMajorant:
    """Step majorant ``sum_k gamma_k 1_{|x| < rho_k} / (2 rho_k)`` of ``|psi_{r,R}|``.

    ``constant`` is the sampled supremum of ``|psi_{r,R}| / zeta`` over the
    covered window ``|x| < rho_K``.
    """

    r: float
    R: float
    gammas: tuple
    radii: tuple
    constant: float

    @property
    def intervals(self):
        return [(-p, p) for p in self.radii]

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for g, p in zip(self.gammas, self.radii):
            out = out + np.where(x < p, g / (2.0 * p), 0.0)
        return out


def zeta_majorant(r: float, R: float, extent: float | None = None,
                  samples: int = 200_001) -> ZetaMajorant:
    """Build a step majorant of ``|psi_{r,R}|`` from nested symmetric intervals.

    Intervals are ``(-2^k/R, 2^k/R)`` for ``k = 0..K``, with ``2^K/R >= extent``.
    Weights are ``2^-k`` plus, when ``r > 0``, a second geometric bump
    centred at the index where ``2^k/R`` reaches ``1/r``; they are
    normalized to sum to 1/2.  ``constant`` is the sampled and locally
    refined supremum of ``|psi| / zeta`` on the covered window, times
    ``1 + ZETA_HEADROOM``.
    """
    if not (0.0 <= r < R / 2.0):
        raise ValueError(f"need 0 <= r < R/2, got r={r!r}, R={R!r}")
    if extent is None:
        extent = 64.0 / (r if r > 0 else R)
    K = max(0, math.ceil(math.log2(extent * R)))
    k = np.arange(K + 1)
    w = 2.0 ** (-k.astype(float))
    if r > 0:
        k0 = round(math.log2(R / r))
        w = w + 2.0 ** (-np.abs(k - k0).astype(float))
    gammas = w / (2.0 * math.fsum(w))
    radii = 2.0 ** k.astype(float) / R

    probe = ZetaMajorant(r, R, tuple(gammas.tolist()), tuple(radii.tolist()), math.nan)
    lin = np.linspace(0.0, radii[-1], samples, endpoint=False)
    logs = np.geomspace(1e-3 / R, radii[-1], samples // 4, endpoint=False)
    x = np.unique(np.concatenate([lin, logs]))

    def ratio(t):
        return np.abs(psi(r, R, t)) / probe(t)

    q = ratio(x)
    # refine the largest sampled peaks by ternary search between neighbours
    peaks = np.flatnonzero((q[1:-1] >= q[:-2]) & (q[1:-1] >= q[2:])) + 1
    best = float(q.max())
    for i in peaks[np.argsort(q[peaks])[-32:]]:
        lo, hi = x[i - 1], x[i + 1]
        for _ in range(100):
            m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
            if ratio(m1) < ratio(m2):
                lo = m1
            else:
                hi = m2
        best = max(best, float(ratio(0.5 * (lo + hi))))
    # headroom for what the refinement cannot see (rounding, missed peaks)
    return ZetaMajorant(r, R, probe.gammas, probe.radii, best * (1.0 + ZETA_HEADROOM))


ZETA_HEADROOM = 1e-6


def cut_radii(h: float, lengths: Sequence[float], R: float):
    """Cut radii ``r_0 = 0, r_k = 2/(h |J_k|)`` and ``m = max{k : r_k < 2R}``.

    Returns ``(radii, m)`` where ``radii[0] == 0``; ``m == 0`` when no cut
    falls below ``2R``.
    """
    if not h > 0 or not R > 0:
        raise ValueError("h and R must be positive")
    lengths = [float(x) for x in lengths]
    if any(x <= 0 for x in lengths) or any(b > a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("interval lengths must be positive and nonincreasing")
    radii = [0.0] + [2.0 / (h * x) for x in lengths]
    m = 0
    for k in range(1, len(radii)):
        if radii[k] < 2.0 * R:
            m = k
    return tuple(radii), m


def split_bands(radii: Sequence[float], R: float):
    """Band pairs ``(lo, hi)`` whose profiles ``psi_hat(lo, hi)`` sum to ``psi_hat(0, R)``.

    The bands are ``(r_0, r_1), (r_1, r_2), ..., (r_j, R)`` where ``j`` is the
    last cut with ``r_j <= R``; each band ``(r_k, r_{k+1})`` is supported in
    ``|xi| >= r_k``.  Returns ``(bands, j)``.
    """
    j = 0
    for k in range(1, len(radii)):
        if radii[k] <= R:
            j = k
    bands = [(radii[k], radii[k + 1]) for k in range(j)] + [(radii[j], R)]
    return bands, j
