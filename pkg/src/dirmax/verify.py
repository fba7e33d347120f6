"""Numerical checks of the pointwise estimates behind the directional bound.

Three families of checks live here:

* :func:`check_lemma1` measures the constant in the pointwise bound of the
  operator Gamma by the parallelogram maximal function of a nearby slope.
* :func:`check_lemma2` verifies the band split of Gamma along a nested
  interval chain: the pieces add up to the whole, each piece is supported in
  its doubled sector, the scalar weights stay below 4, and the sheared
  maximal function of ``f`` is dominated by the right-hand side built from
  sector-projected pieces.
* :func:`check_sector_overlap` counts how many doubled gap intervals of one
  level cover a slope.

Doubled sectors here are doubled in slope, ``[a - |J|/2, b + |J|/2]``: the
band pieces spread to slopes ``theta +- |J_k|/2`` around any ``theta`` in
``J_k``, which the angle-doubled sector does not always contain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .directions import (LacunaryCertificate, RunSpec, SlopeSet, build_n_lacunary,
                         gaps, geometric_slopes)
from .gridops import (GridFunction, SlopeInterval, apply_symbol, frequency_slopes,
                      gamma_apply, gamma_symbol, parallelogram_max, sector_double,
                      sector_project)
from .kernels import KernelParams, cut_radii, split_bands

EPS_FLOOR = 1e-9          # denominator floor, relative to max |f|
SUPPORT_ZERO = 1e-14      # symbol values at or below this count as zero
TELESCOPE_TOL = 1e-10
SCALAR_BOUND = 4.0
# a few ulps of slack for the scalar bound, which is an exact inequality
SCALAR_SLACK = 8 * np.finfo(float).eps


class ChainError(ValueError):
    """An interval chain breaks nesting, the spacing condition, or theta membership."""

    def __init__(self, level: int, message: str):
        super().__init__(f"level {level}: {message}")
        self.level = level


class StructuralCheckError(AssertionError):
    """A check that holds exactly by construction failed."""


@dataclass(frozen=True)
class IntervalChain:
    """Nested slope intervals ``J_1 ⊃ ... ⊃ J_n`` and a slope ``theta`` in all of them.

    Consecutive intervals satisfy ``dist(complement(J_k), J_{k+1}) <= |J_{k+1}|``:
    each interval sits within its own length of an end of its parent.
    Levels are numbered from 1.
    """

    intervals: tuple
    theta: float

    def __post_init__(self):
        ivs = tuple(j if isinstance(j, SlopeInterval) else SlopeInterval(*j)
                    for j in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "theta", float(self.theta))
        self.validate()

    def __len__(self):
        return len(self.intervals)

    def validate(self) -> None:
        if not self.intervals:
            raise ChainError(0, "chain is empty")
        for k, j in enumerate(self.intervals, start=1):
            if not (j.a <= self.theta <= j.b):
                raise ChainError(k, f"theta={self.theta!r} outside [{j.a!r}, {j.b!r}]")
        for k in range(1, len(self.intervals)):
            outer, inner = self.intervals[k - 1], self.intervals[k]
            if not (outer.a <= inner.a and inner.b <= outer.b):
                raise ChainError(k + 1, "interval not nested in its parent")
            dist = min(inner.a - outer.a, outer.b - inner.b)
            if dist > inner.length:
                raise ChainError(k + 1, f"distance {dist!r} to the parent's ends exceeds "
                                        f"length {inner.length!r}")

    @property
    def lengths(self):
        return [j.length for j in self.intervals]

    def to_dict(self) -> dict:
        return {"theta": self.theta, "intervals": [[j.a, j.b] for j in self.intervals]}

    @classmethod
    def from_dict(cls, d) -> "IntervalChain":
        return cls(tuple(tuple(j) for j in d["intervals"]), d["theta"])


def build_chain(cert: LacunaryCertificate, theta: float) -> IntervalChain:
    """Chain of gaps of ``Omega_1, ..., Omega_m`` containing ``theta``.

    ``m`` is the level at which ``theta`` enters the set.  Below it ``theta``
    lies inside exactly one gap; at level ``m`` it is a vertex and the gap
    starting at ``theta`` is taken, or the one ending there if ``theta`` is
    the largest point.
    """
    theta = float(theta)
    if theta not in cert.chain[-1]:
        raise ValueError(f"theta={theta!r} is not in the certified set")
    m = next(k for k, lev in enumerate(cert.chain, start=1) if theta in lev)
    ivs = []
    for k in range(1, m + 1):
        pts = cert.chain[k - 1]
        if len(pts) < 2:
            raise ChainError(k, "level has fewer than two points and no gaps")
        g = gaps(pts)
        if k < m:
            hit = [(a, b) for a, b in g if a < theta < b]
        else:
            hit = [(a, b) for a, b in g if a == theta] or [(a, b) for a, b in g if b == theta]
        if len(hit) != 1:
            raise ChainError(k, f"theta={theta!r} is not in exactly one gap")
        ivs.append(SlopeInterval(*hit[0]))
    return IntervalChain(tuple(ivs), theta)


def lemma2_scalars(chain: IntervalChain, h: float):
    """``h * r_{k+1} * min(|theta - alpha_k|, |theta - beta_k|)`` for ``k = 1..n-1``."""
    radii, _ = cut_radii(h, chain.lengths, 1.0)
    out = []
    for k in range(1, len(chain)):
        j = chain.intervals[k - 1]
        out.append(h * radii[k + 1] * min(abs(chain.theta - j.a), abs(chain.theta - j.b)))
    return out


def scalar_bound_holds(values: Sequence[float]) -> bool:
    return all(v <= SCALAR_BOUND * (1.0 + SCALAR_SLACK) for v in values)


# -- single-slope pointwise bound ------------------------------------------------

def _floor_mask(f: GridFunction, denom: np.ndarray):
    eps = EPS_FLOOR * float(np.max(np.abs(f.samples)))
    return denom > eps


def check_lemma1(f: GridFunction, p: KernelParams, beta: float, scales=None):
    """Largest ratio ``|Gamma f| / ((h R |alpha - beta| + 1) P_beta f)``.

    The ratio is taken over grid points where the denominator exceeds
    ``1e-9 * max|f|``.  Returns ``(max_ratio, (i1, i2))``.
    """
    if np.any(f.samples < 0):
        raise ValueError("f must be nonnegative")
    g = np.abs(gamma_apply(f, p).samples)
    pb = parallelogram_max(f, beta, scales).samples
    denom = (p.h * p.R * abs(p.alpha - beta) + 1.0) * pb
    ok = _floor_mask(f, denom)
    if not ok.any():
        raise ValueError("denominator vanishes everywhere; degenerate input")
    ratio = np.where(ok, g / np.where(ok, denom, 1.0), -np.inf)
    idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    return float(ratio[idx]), (int(idx[0]), int(idx[1]))


def lemma1_suite(count: int = 100, n: int = 128, seed: int = 20240611, scales=None):
    """Fixed random suite of ``(f, KernelParams, beta)`` with ``h R |alpha - beta| <= 4``."""
    rng = np.random.default_rng(seed)
    nyq = math.pi  # unit spacing
    cases = []
    for i in range(count):
        R = rng.uniform(0.1, 0.45 * nyq)
        r = 0.0 if rng.random() < 0.3 else R * rng.uniform(1 / 16, 0.45)
        h = float(np.exp(rng.uniform(np.log(1.0), np.log(12.0))))
        alpha = rng.uniform(0.02, 0.95)
        spread = min(4.0 / (h * R), 0.9)
        beta = float(np.clip(alpha + rng.uniform(-spread, spread), 0.01, 0.99))
        if h * R * abs(alpha - beta) > 4.0:
            beta = alpha
        f = random_field(rng, n, kind=("bumps", "sparse", "smooth", "cell")[i % 4])
        cases.append((f, KernelParams(r, R, h, alpha), beta))
    return cases


def random_field(rng, n: int, kind: str = "bumps") -> GridFunction:
    """Nonnegative random test grid."""
    if kind == "cell":
        a = np.zeros((n, n))
        a[rng.integers(n), rng.integers(n)] = 1.0
    elif kind == "sparse":
        a = (rng.random((n, n)) < 0.01) * rng.random((n, n))
        a[0, 0] += 1.0
    elif kind == "smooth":
        F = np.fft.rfft2(rng.standard_normal((n, n)))
        k = np.hypot(np.fft.fftfreq(n)[:, None], np.fft.rfftfreq(n)[None, :])
        a = np.fft.irfft2(F * np.exp(-(k * 12) ** 2), s=(n, n))
        a = a - a.min()
    else:
        a = np.zeros((n, n))
        for _ in range(rng.integers(1, 6)):
            c1, c2 = rng.integers(n, size=2)
            w1, w2 = rng.integers(1, n // 8, size=2)
            a[np.ix_((c1 + np.arange(w1)) % n, (c2 + np.arange(w2)) % n)] += rng.random()
    return GridFunction(a)


# -- band split along a chain -----------------------------------------------------

@dataclass
class Lemma2Report:
    cut_radii: tuple
    m: int                       # max{k : r_k < 2R}
    last_band: int               # index j of the last cut with r_j <= R
    bands: list
    telescoping_error: float
    support_ok: bool
    support_violations: list
    scalars: list
    scalar_ok: bool
    constant_sheared: float      # max P_theta f / RHS
    constant_gamma: float        # max |Gamma f| / RHS
    piece_constants: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.telescoping_error <= TELESCOPE_TOL and self.support_ok
                and self.scalar_ok)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["bands"] = [list(b) for b in self.bands]
        d["cut_radii"] = list(self.cut_radii)
        d["ok"] = self.ok
        return d


def split_symbols(n: int, L: float, chain: IntervalChain, R: float, h: float):
    """Symbols of the unsplit operator and of its band pieces along ``chain``."""
    radii, m = cut_radii(h, chain.lengths, R)
    bands, j = split_bands(radii, R)
    whole = gamma_symbol(n, L, 0.0, R, h, chain.theta)
    pieces = [gamma_symbol(n, L, lo, hi, h, chain.theta) for lo, hi in bands]
    return radii, m, bands, j, whole, pieces


def telescoping_error(f: GridFunction, chain: IntervalChain, R: float, h: float) -> float:
    """Relative L2 gap between the unsplit operator and the sum of its pieces."""
    _, _, _, _, whole, pieces = split_symbols(f.n, f.L, chain, R, h)
    ref = apply_symbol(f, whole).samples
    tot = np.zeros_like(ref)
    for s in pieces:
        tot += apply_symbol(f, s).samples
    den = np.linalg.norm(ref)
    return float(np.linalg.norm(tot - ref) / den) if den > 0 else float(np.linalg.norm(tot))


def support_violations(n: int, L: float, chain: IntervalChain, R: float, h: float):
    """Pieces ``k >= 1`` with nonzero symbol outside the doubled sector of ``J_k``.

    Every discrete frequency is checked.  Returns a list of
    ``(k, count, worst_slope)``; empty means containment holds.
    """
    _, _, _, _, _, pieces = split_symbols(n, L, chain, R, h)
    t, _ = frequency_slopes(n, L)
    bad = []
    for k in range(1, len(pieces)):
        sec = sector_double(chain.intervals[k - 1], mode="slope")
        nz = np.abs(pieces[k]) > SUPPORT_ZERO
        inside = np.isfinite(t) & (t >= sec.lo) & (t <= sec.hi)
        out = nz & ~inside
        if out.any():
            bad.append((k, int(out.sum()), float(np.nanmax(np.where(out, t, np.nan)))))
    return bad


def _ratio_max(num, den, mask):
    if not mask.any():
        return 0.0
    return float(np.max(num[mask] / den[mask]))


def check_lemma2(f: GridFunction, chain: IntervalChain, R: float, h: float,
                 scales=None, strict: bool = True) -> Lemma2Report:
    """Check the band split of ``Gamma^theta_{0,R,h}`` along ``chain`` on ``f``.

    Structural parts (telescoping, support, scalar weights) raise
    :class:`StructuralCheckError` when ``strict`` and they fail.  The
    empirical constants compare ``P_theta f`` and ``|Gamma f|`` with

        P_0 f + P_theta(T_n f) + sum_{k=1..n} (P_{alpha_k} + P_{beta_k})(T_k f)

    where ``T_k`` projects onto the slope-doubled sector of ``J_k``.
    """
    chain.validate()
    radii, m, bands, j, whole, pieces = split_symbols(f.n, f.L, chain, R, h)
    ref = apply_symbol(f, whole).samples
    outs = [apply_symbol(f, s).samples for s in pieces]
    tot = np.sum(outs, axis=0)
    den = np.linalg.norm(ref)
    tel = float(np.linalg.norm(tot - ref) / den) if den > 0 else float(np.linalg.norm(tot))
    viol = support_violations(f.n, f.L, chain, R, h)
    scal = lemma2_scalars(chain, h)
    sc_ok = scalar_bound_holds(scal)

    if strict:
        if tel > TELESCOPE_TOL:
            raise StructuralCheckError(f"telescoping error {tel:.3e} above {TELESCOPE_TOL}")
        if viol:
            raise StructuralCheckError(f"support outside doubled sector for pieces {viol}")
        if not sc_ok:
            raise StructuralCheckError(f"scalar weights {scal} exceed {SCALAR_BOUND}")

    theta = chain.theta
    proj = [sector_project(f, sector_double(J, mode="slope")) for J in chain.intervals]
    p0 = parallelogram_max(f, 0.0, scales).samples
    rhs = p0 + parallelogram_max(proj[-1], theta, scales).samples
    ends = []
    for J, g in zip(chain.intervals, proj):
        e = (parallelogram_max(g, J.a, scales).samples
             + parallelogram_max(g, J.b, scales).samples)
        ends.append(e)
        rhs = rhs + e
    lhs = parallelogram_max(f, theta, scales).samples
    mask = _floor_mask(f, rhs)
    const_p = _ratio_max(lhs, rhs, mask)
    const_g = _ratio_max(np.abs(ref), rhs, mask)

    # per-piece bounds: |Gamma_0| by P_0, middle pieces by their endpoint
    # terms, the last piece by P_theta of its projection
    piece_c = [_ratio_max(np.abs(outs[0]), p0, _floor_mask(f, p0))]
    for k in range(1, len(outs)):
        if k < len(outs) - 1:
            d = ends[k - 1]
        else:
            d = parallelogram_max(proj[k - 1], theta, scales).samples
        piece_c.append(_ratio_max(np.abs(outs[k]), d, _floor_mask(f, d)))

    return Lemma2Report(tuple(radii), m, j, bands, tel, not viol, viol, scal, sc_ok,
                        const_p, const_g, piece_c)


# -- random chains and certificates ----------------------------------------------

def random_chain(rng, levels: int) -> IntervalChain:
    """Random chain satisfying the nesting and spacing conditions."""
    a = rng.uniform(0.02, 0.5)
    b = rng.uniform(a + 0.1, 0.98)
    ivs = [SlopeInterval(a, b)]
    for _ in range(levels - 1):
        J = ivs[-1]
        ln = J.length * rng.uniform(0.25, 0.75)
        d = rng.uniform(0.0, min(ln, J.length - ln))
        if rng.random() < 0.5:
            lo = J.a + d
        else:
            lo = J.b - d - ln
        lo = min(max(lo, J.a), J.b - ln)
        ivs.append(SlopeInterval(lo, lo + ln))
    last = ivs[-1]
    return IntervalChain(tuple(ivs), rng.uniform(last.a, last.b))


def chain_scale(chain: IntervalChain, R: float) -> float:
    """Window width ``h`` putting the first cut radius at ``R/8``."""
    return 16.0 / (chain.intervals[0].length * R)


def random_certified_set(rng, max_levels: int = 4) -> SlopeSet:
    """Random built set of order ``1..max_levels`` from geometric runs."""
    ratio = rng.uniform(0.34, 0.49)
    base = geometric_slopes(ratio, int(rng.integers(2, 6)), anchor=rng.uniform(0.5, 0.99))
    levels = []
    for _ in range(int(rng.integers(0, max_levels))):
        levels.append(RunSpec(rng.uniform(0.34, 0.49), int(rng.integers(1, 4)),
                              "left" if rng.random() < 0.5 else "right"))
    return build_n_lacunary(base, levels)


# -- overlap of doubled gap intervals ---------------------------------------------

def overlap_multiplicity(intervals: Sequence[tuple], rel_tol: float = 1e-12) -> int:
    """Largest number of slope-doubled intervals ``[a - w/2, b + w/2)`` sharing a point.

    Coverage is piecewise constant between interval ends, so it is sampled
    once between each pair of consecutive ends.  Ends closer than
    ``rel_tol`` times the total span are merged first, so that intervals
    meeting end to end (up to rounding) are not counted as overlapping.
    """
    if not intervals:
        return 0
    lo = np.array([a - 0.5 * (b - a) for a, b in intervals])
    hi = np.array([b + 0.5 * (b - a) for a, b in intervals])
    ends = np.sort(np.concatenate([lo, hi]))
    tol = rel_tol * (ends[-1] - ends[0])
    merged = [ends[0]]
    for x in ends[1:]:
        if x - merged[-1] > tol:
            merged.append(x)
    if len(merged) < 2:
        return len(intervals)
    mids = 0.5 * (np.array(merged[:-1]) + np.array(merged[1:]))
    cover = (lo[None, :] <= mids[:, None]) & (mids[:, None] < hi[None, :])
    return int(cover.sum(axis=1).max())


def check_sector_overlap(cert: LacunaryCertificate):
    """Per-level maximum number of doubled gap intervals covering one slope."""
    return [overlap_multiplicity(gaps(level)) for level in cert.chain]


# -- kernel self-checks -----------------------------------------------------------

def fejer_by_quadrature(r: float, x: float, panels: int = 64, order: int = 24) -> float:
    """``2 int_0^r (1 - t/r) cos(x t) dt`` by composite Gauss-Legendre."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, r, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        total += 0.5 * (b - a) * float(np.sum(weights * (1.0 - t / r) * np.cos(x * t)))
    return 2.0 * total


def sampled_transform(fn, dx: float, extent: float):
    """Riemann-sum transform ``sum fn(x) exp(i x xi) dx`` of an even function on a fine grid.

    Returns ``(xi, values)`` for ``xi >= 0``.
    """
    m = int(round(extent / dx))
    x = (np.arange(m) - m // 2) * dx
    vals = fn(x)
    F = np.fft.rfft(np.fft.ifftshift(vals)) * dx
    xi = 2.0 * math.pi * np.fft.rfftfreq(m, dx)
    return xi, F.real


def kernel_checks():
    """Self-checks of the kernel module; returns ``[(name, ok, detail), ...]``."""
    from . import constants
    from .kernels import fejer, psi, psi_hat, window_phi, window_phi_hat, zeta_majorant
    out = []

    bp = psi_hat(1.0, 4.0).breakpoints
    want = ((0.0, 0.0), (1.0, 0.0), (2.0, 1.0), (4.0, 1.0), (8.0, 0.0))
    out.append(("band profile breakpoints", bp == want, str(bp)))

    xi, F = sampled_transform(lambda x: psi(1.0, 4.0, x), 0.05, 8000.0)
    sel = xi <= 10.0
    err = float(np.max(np.abs(F[sel] / (2 * math.pi) - psi_hat(1.0, 4.0)(xi[sel]))))
    out.append(("band kernel transform vs profile", err <= 2e-3, f"max abs error {err:.2e}"))

    xi, F = sampled_transform(lambda x: window_phi(2.0, x), 0.05, 8000.0)
    sel = xi <= 2.0
    err_w = float(np.max(np.abs(F[sel] - window_phi_hat(2.0)(xi[sel]))))
    out.append(("window transform vs triangle", err_w <= 2e-3, f"max abs error {err_w:.2e}"))

    worst = 0.0
    for r in (0.5, 1.0, 3.0):
        for x in (0.0, 1e-3, 0.7, 2.5, 11.0, 40.0):
            worst = max(worst, abs(fejer(r, x) - fejer_by_quadrature(r, x)))
    out.append(("Fejer kernel vs quadrature", worst <= 1e-10, f"max abs error {worst:.2e}"))

    c = zeta_majorant(1.0, 8.0).constant
    lim = constants.limit("zeta_C_1_8")
    out.append(("step majorant constant (r=1, R=8)", c <= lim, f"{c:.4f} <= {lim:.4f}"))
    return out
