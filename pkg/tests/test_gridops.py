import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirmax.gridops import (GridFormatError, GridFunction, Sector, SlopeInterval,
                            directional_max, dyadic_scales,
                            gamma_apply, gamma_kernel, gamma_symbol, parallelogram_max,
                            parse_scales, sector_double, sector_project,
                            strong_max, wide_scales)
from dirmax.kernels import KernelParams
from dirmax.reference import brute_parallelogram_max


def int_grid(rng, n, hi=1000):
    # integer-valued samples make every window sum exact in any order
    return GridFunction(rng.integers(-hi, hi, (n, n)).astype(float))


# -- grid container ---------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ValueError):
        GridFunction(np.zeros((12, 12)))
    with pytest.raises(ValueError):
        GridFunction(np.zeros((16, 32)))
    bad = np.zeros((16, 16))
    bad[3, 4] = np.nan
    with pytest.raises(ValueError):
        GridFunction(bad)
    g = GridFunction(np.zeros((16, 16)), 8.0)
    assert g.spacing == 0.5
    with pytest.raises(ValueError):
        g.samples[0, 0] = 1.0


def test_dmg1_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    g = GridFunction(rng.standard_normal((32, 32)), 3.5)
    data = g.to_bytes()
    assert data[:8] == b"DMAXGRD1"
    assert len(data) == 8 + 4 + 8 + 8 * 32 * 32
    assert int.from_bytes(data[8:12], "little") == 32
    back = GridFunction.from_bytes(data)
    assert back.L == 3.5 and np.array_equal(back.samples, g.samples)
    g.save(tmp_path / "g.dmg")
    assert GridFunction.load(tmp_path / "g.dmg").to_bytes() == data


def test_dmg1_errors():
    g = GridFunction(np.ones((16, 16)))
    with pytest.raises(GridFormatError):
        GridFunction.from_bytes(b"XXXXXXXX" + g.to_bytes()[8:])
    with pytest.raises(GridFormatError):
        GridFunction.from_bytes(g.to_bytes()[:-8])


def test_pgm_preview():
    g = GridFunction(np.arange(256.0).reshape(16, 16))
    pgm = g.to_pgm()
    assert pgm.startswith(b"P5\n16 16\n255\n")
    assert pgm[-1] == 255 and pgm[len(b"P5\n16 16\n255\n")] == 0


def test_scale_parsing():
    assert dyadic_scales(64) == [(a, b) for a in (1, 2, 4, 8, 16) for b in (1, 2, 4, 8, 16)]
    assert all(b <= a for a, b in parse_scales("thin", 64))
    assert parse_scales("1x2,3x4", 64) == [(1, 2), (3, 4)]
    assert (31, 31) in wide_scales(64)


# -- parallelogram maximal function -----------------------------------------------

@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.375, 0.5, 0.99])
def test_constant_input(alpha):
    g = GridFunction(np.full((32, 32), 1.5))
    assert np.array_equal(parallelogram_max(g, alpha).samples, g.samples)
    c = GridFunction(np.full((32, 32), 0.1))
    np.testing.assert_allclose(parallelogram_max(c, alpha).samples, 0.1, rtol=1e-15)


def test_single_cell_three_by_three():
    a = np.zeros((16, 16))
    a[5, 9] = 1.0
    out = parallelogram_max(GridFunction(a), 0.0, [(1, 1)]).samples
    want = np.zeros((16, 16))
    want[4:7, 8:11] = 1.0 / 9.0
    assert np.array_equal(out, want)


def test_brute_force_spec_instance():
    rng = np.random.default_rng(375)
    f = int_grid(rng, 32)
    sc = dyadic_scales(32)
    fast = parallelogram_max(f, 0.375, sc).samples
    slow = np.array(brute_parallelogram_max(f.samples.tolist(), 0.375, sc))
    assert fast.tobytes() == slow.tobytes()


def test_brute_force_real_valued():
    rng = np.random.default_rng(1)
    f = GridFunction(rng.standard_normal((16, 16)))
    for alpha in (0.1, 0.5, 0.77):
        sc = [(1, 1), (2, 1), (1, 3), (4, 4), (7, 2)]
        fast = parallelogram_max(f, alpha, sc).samples
        slow = np.array(brute_parallelogram_max(f.samples.tolist(), alpha, sc))
        np.testing.assert_allclose(fast, slow, rtol=1e-13, atol=0)


def test_ties_round_to_even():
    # alpha = 0.5: offsets round(i/2) are 0, 0, 1, 2, 2 for i = 0..4
    a = np.zeros((16, 16))
    a[8, 8] = 1.0
    out = parallelogram_max(GridFunction(a), 0.5, [(1, 1)]).samples
    slow = np.array(brute_parallelogram_max(a.tolist(), 0.5, [(1, 1)]))
    assert np.array_equal(out, slow)


def test_scale_clipping_warns():
    g = GridFunction(np.ones((16, 16)))
    with pytest.warns(UserWarning, match="clipped"):
        out = parallelogram_max(g, 0.2, [(20, 1)])
    assert np.array_equal(out.samples, g.samples)


def test_strong_max_is_alpha_zero():
    rng = np.random.default_rng(2)
    f = GridFunction(rng.random((32, 32)))
    assert np.array_equal(strong_max(f).samples, parallelogram_max(f, 0.0).samples)


def test_singleton_direction_set():
    rng = np.random.default_rng(3)
    f = GridFunction(rng.random((32, 32)))
    assert np.array_equal(directional_max(f, [0.42]).samples,
                          parallelogram_max(f, 0.42).samples)
    with pytest.raises(ValueError):
        directional_max(f, [])


grids = st.integers(0, 2 ** 32 - 1).map(
    lambda s: np.random.default_rng(s).standard_normal((16, 16)))
slopes = st.lists(st.floats(0.0, 0.99), min_size=1, max_size=4)


@settings(max_examples=30, deadline=None)
@given(grids, grids, slopes)
def test_sublinear(a, b, omega):
    fa, fb = GridFunction(a), GridFunction(b)
    lhs = directional_max(GridFunction(a + b), omega).samples
    rhs = directional_max(fa, omega).samples + directional_max(fb, omega).samples
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-12)


@settings(max_examples=30, deadline=None)
@given(grids, slopes, st.sampled_from([-4.0, -1.0, 0.5, 2.0, 8.0]))
def test_positively_homogeneous(a, omega, c):
    # powers of two scale exactly
    m1 = directional_max(GridFunction(c * a), omega).samples
    m2 = abs(c) * directional_max(GridFunction(a), omega).samples
    assert np.array_equal(m1, m2)


@settings(max_examples=30, deadline=None)
@given(grids, slopes, slopes)
def test_monotone_in_direction_set(a, om1, om2):
    f = GridFunction(a)
    small = directional_max(f, om1).samples
    big = directional_max(f, om1 + om2).samples
    assert np.all(small <= big)


# -- Gamma multiplier -------------------------------------------------------------

def mode(n, L, k1, k2):
    x = np.arange(n) * L / n
    return np.cos(2 * math.pi / L * (k1 * x[:, None] + k2 * x[None, :]))


def test_gamma_passes_plateau_mode():
    n, L = 64, 8 * math.pi          # xi = k / 4, Nyquist 8
    p = KernelParams(1.0, 4.0, 2.0, 0.25)
    f = GridFunction(mode(n, L, -3, 12), L)   # xi2 = 3, xi1 = -alpha xi2
    out = gamma_apply(f, p).samples
    assert np.max(np.abs(out - f.samples)) <= 1e-10


def test_gamma_kills_low_mode():
    n, L = 64, 8 * math.pi
    p = KernelParams(1.0, 4.0, 2.0, 0.25)
    f = GridFunction(mode(n, L, 5, 2), L)     # |xi2| = 0.5 < r
    assert np.max(np.abs(gamma_apply(f, p).samples)) <= 1e-12


def test_gamma_direct_convolution():
    n = 64
    p = KernelParams(0.25, 1.0, 2.0, 0.5)
    rng = np.random.default_rng(4)
    f = GridFunction(rng.standard_normal((n, n)))
    # periodized kernel on the grid, images summed out to M periods
    M = 30
    x = np.arange(n)
    x = np.where(x < n // 2, x, x - n).astype(float)
    K = np.zeros((n, n))
    for m1 in range(-M, M + 1):
        X1 = (x + m1 * n)[:, None]
        for m2 in range(-M, M + 1):
            K += gamma_kernel(p, X1, (x + m2 * n)[None, :])
    # periodic convolution as an explicit shift-and-add
    direct = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            direct += K[a, b] * np.roll(f.samples, (a, b), axis=(0, 1))
    ref = gamma_apply(f, p).samples
    err = np.linalg.norm(direct - ref) / np.linalg.norm(ref)
    assert err <= 1e-3


@settings(max_examples=20, deadline=None)
@given(grids, grids, st.floats(-3, 3), st.floats(-3, 3))
def test_gamma_linear(a, b, s, t):
    p = KernelParams(0.3, 1.0, 1.5, 0.4)
    lhs = gamma_apply(GridFunction(s * a + t * b), p).samples
    rhs = s * gamma_apply(GridFunction(a), p).samples + t * gamma_apply(GridFunction(b), p).samples
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * scale + 1e-14


def test_gamma_nyquist_warning():
    with pytest.warns(UserWarning, match="Nyquist"):
        gamma_symbol(32, 32.0, 0.5, 2.0, 1.0, 0.3)


def test_nyquist_bins_zero():
    sym = gamma_symbol(32, 32.0, 0.0, 1.5, 0.5, 0.3)
    assert np.all(sym[16, :] == 0) and np.all(sym[:, 16] == 0)


# -- sectors ----------------------------------------------------------------------

def test_sector_double_angle_example():
    j = SlopeInterval(0.2, 0.4)
    s = sector_double(j)
    ta, tb = math.atan(0.2), math.atan(0.4)
    mid, half = (ta + tb) / 2, (tb - ta) / 2
    assert s.lo == math.tan(mid - 2 * half) and s.hi == math.tan(mid + 2 * half)
    assert s.bisectrix == Sector.of(j).bisectrix
    assert s.lo <= j.a and j.b <= s.hi and s.doubled and not s.clipped


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 0.99), st.floats(0.001, 0.99))
def test_sector_double_properties(a, b):
    if not a < b:
        return
    j = SlopeInterval(a, b)
    s = sector_double(j)
    assert s.bisectrix == Sector.of(j).bisectrix
    assert s.lo <= a and b <= s.hi
    assert 0.0 <= s.lo and s.hi <= 1.0
    w = sector_double(j, mode="slope")
    assert w.lo == a - (b - a) / 2 and w.hi == b + (b - a) / 2


def test_sector_double_records_clip():
    s = sector_double(SlopeInterval(0.01, 0.3))
    assert s.clipped and s.lo == 0.0


def test_degenerate_interval():
    with pytest.raises(ValueError):
        SlopeInterval(0.3, 0.3)


def modes_grid(n, pairs, rng):
    x = np.arange(n)
    a = np.zeros((n, n))
    for k1, k2 in pairs:
        ph = rng.uniform(0, 2 * math.pi)
        a += np.cos(2 * math.pi / n * (k1 * x[:, None] + k2 * x[None, :]) + ph)
    return a


def test_sector_identity_inside():
    n = 64
    s = Sector.of(SlopeInterval(0.2, 0.6))
    pairs = [(-1, 3), (-2, 5), (-4, 9), (3, -10)]      # -k1/k2 in (0.2, 0.6)
    f = GridFunction(modes_grid(n, pairs, np.random.default_rng(5)))
    out = sector_project(f, s).samples
    assert np.max(np.abs(out - f.samples)) <= 1e-10


def test_sector_kills_outside_double():
    n = 64
    j = SlopeInterval(0.2, 0.4)
    s = Sector.of(j)
    pairs = [(-7, 8), (1, 5), (0, 9), (6, 0), (-1, 20)]  # slopes 0.875, -0.2, 0, axis, 0.05
    f = GridFunction(modes_grid(n, pairs, np.random.default_rng(6)))
    d = sector_double(j)
    for k1, k2 in pairs:
        assert k2 == 0 or not (d.lo <= -k1 / k2 <= d.hi)
    assert np.max(np.abs(sector_project(f, s).samples)) <= 1e-12


def full_grid_partition_energy(f, s):
    # direct sum over the full fft2 grid with an independent membership test
    n = f.shape[0]
    F = np.fft.fft2(f)
    k = np.fft.fftfreq(n, 1 / n)
    inside = outside = 0.0
    for a, k1 in enumerate(k):
        for b, k2 in enumerate(k):
            if abs(k1) == n // 2 or abs(k2) == n // 2:
                continue
            e = abs(F[a, b]) ** 2
            if k1 == 0 and k2 == 0:
                inside += e
                outside += e
            elif k2 != 0 and s.lo <= -k1 / k2 <= s.hi:
                inside += e
            else:
                outside += e
    return inside / n ** 2, outside / n ** 2, abs(F[0, 0]) ** 2 / n ** 2


@pytest.mark.parametrize("seed", range(3))
def test_parseval_partition(seed):
    n = 32
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n, n))
    s = Sector.of(SlopeInterval(*sorted(rng.uniform(0.05, 0.95, 2))))
    p_in = sector_project(GridFunction(f), s).samples
    p_out = sector_project(GridFunction(f), s, complement=True).samples
    e_in, e_out, dc = full_grid_partition_energy(f, s)
    assert abs(np.sum(p_in ** 2) - e_in) <= 1e-9 * np.sum(f ** 2)
    assert abs(np.sum(p_out ** 2) - e_out) <= 1e-9 * np.sum(f ** 2)
    # with the Nyquist lines removed first, the two parts recover f up to the DC overlap
    F = np.fft.fft2(f)
    F[n // 2, :] = 0
    F[:, n // 2] = 0
    g = np.fft.ifft2(F).real
    a = sector_project(GridFunction(g), s).samples
    b = sector_project(GridFunction(g), s, complement=True).samples
    total = np.sum(a ** 2) + np.sum(b ** 2) - dc
    assert abs(total - np.sum(g ** 2)) <= 1e-9 * np.sum(g ** 2)


@settings(max_examples=20, deadline=None)
@given(grids, st.floats(0.01, 0.9), st.floats(0.01, 0.5))
def test_sector_idempotent(a, lo, w):
    s = Sector(lo, lo + w)
    once = sector_project(GridFunction(a), s)
    twice = sector_project(once, s)
    assert np.max(np.abs(twice.samples - once.samples)) <= 1e-12


def test_angle_doubling_misses_band_support():
    # a band piece centred on theta = 0.2 in J = [0.2, 0.4] spreads to slope
    # theta - |J|/2 = 0.1, which lies below the angle-doubled sector
    j = SlopeInterval(0.2, 0.4)
    assert sector_double(j).lo > 0.1
    assert sector_double(j, mode="slope").lo <= 0.1
