import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from msfc import load_wti
from msfc.emd import (
    BoundaryMode,
    Decomposition,
    Extrema,
    SiftConfig,
    decompose,
    extend_extrema_sbm,
    find_extrema,
    reconstruct,
    sift,
    spline_envelope,
)
from msfc.exceptions import CorruptDecompositionError, InsufficientKnotsError, NotSiftableError

import oracles

T = np.arange(626, dtype=float)


def rel_err(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_find_extrema_examples():
    mx, mn = find_extrema([0, 1, 0, -1, 0])
    assert_array_equal(mx.index, [1]) and assert_array_equal(mx.value, [1])
    assert_array_equal(mn.index, [3]) and assert_array_equal(mn.value, [-1])
    mx, mn = find_extrema(np.arange(10.0))
    assert len(mx) == 0 and len(mn) == 0
    mx, _ = find_extrema([0, 1, 1, 0])
    assert_array_equal(mx.index, [1])
    mx, _ = find_extrema([0, 2, 2, 2, 0])
    assert_array_equal(mx.index, [2])


def test_find_extrema_are_strict_local_extrema():
    x = np.random.default_rng(0).normal(size=300)
    mx, mn = find_extrema(x)
    for i in mx.index:
        assert x[i] > x[i - 1] and x[i] > x[i + 1]
    for i in mn.index:
        assert x[i] < x[i - 1] and x[i] < x[i + 1]


def test_sbm_examples():
    x = np.sin(2 * np.pi * (T[:200] - 10) / 40 + np.pi / 2)
    mx, mn = find_extrema(x)
    assert list(mx.index[:2]) == [10, 50]
    ext, _, fell_back = extend_extrema_sbm(mx, mn, x)
    assert not fell_back
    assert ext.index[0] == -30 and abs(ext.value[0] - 1.0) < 1e-12
    # original extrema are kept unchanged
    assert_array_equal(ext.index[1 : 1 + len(mx)], mx.index)

    mx = Extrema(np.array([5, 25, 45]), np.array([2.0, 3.0, 2.5]))
    mn = Extrema(np.array([15, 35]), np.array([-1.0, -1.0]))
    sig = np.zeros(50)
    ext, _, _ = extend_extrema_sbm(mx, mn, sig)
    assert ext.index[0] == -15 and ext.value[0] == 1.0
    assert ext.index[-1] >= 50


def test_sbm_fallback_on_ramp():
    x = np.arange(20.0)
    mx, mn, fell_back = extend_extrema_sbm(*find_extrema(x), x)
    assert fell_back
    assert_array_equal(mx.index, [0, 19]) and assert_array_equal(mn.value, [0.0, 19.0])


def test_sbm_endpoint_guard():
    # endpoint far above the line through the first two maxima
    x = np.sin(2 * np.pi * T[:200] / 40)
    x[0] = 5.0
    mx, mn, _ = extend_extrema_sbm(*find_extrema(x), x)
    assert 0 in mx.index and mx.value[list(mx.index).index(0)] == 5.0


def test_spline_envelope_examples():
    line = spline_envelope(Extrema(np.array([2, 8]), np.array([1.0, 4.0])), 12)
    assert_allclose(line, oracles.natural_spline_line(2, 1.0, 8, 4.0, range(12)), atol=1e-14)
    with pytest.raises(InsufficientKnotsError):
        spline_envelope(Extrema(np.array([2]), np.array([1.0])), 12)


def test_spline_envelope_interpolates_knots():
    rng = np.random.default_rng(2)
    idx = np.sort(rng.choice(np.arange(-10, 110), size=15, replace=False))
    val = rng.normal(size=15)
    env = spline_envelope(Extrema(idx, val), 100)
    inside = (idx >= 0) & (idx < 100)
    assert np.max(np.abs(env[idx[inside]] - val[inside])) <= 1e-12


def test_spline_reproduces_cubic_with_clamped_ends():
    # a natural spline reproduces a cubic only if the end curvature matches;
    # clamping the second derivative to the true values isolates the interpolant
    p = np.polynomial.Polynomial([0.5, -0.2, 0.03, -0.0004])
    idx = np.array([0, 7, 19, 30, 44, 60])
    d2 = p.deriv(2)
    bc = ((2, d2(idx[0])), (2, d2(idx[-1])))
    env = spline_envelope(Extrema(idx, p(idx)), 61, bc_type=bc)
    assert np.max(np.abs(env - p(np.arange(61)))) <= 1e-9


def test_sift_pure_sinusoid():
    x = np.sin(2 * np.pi * T / (626 / 20))
    imf = sift(x)
    centre = slice(60, -60)
    assert np.max(np.abs((x - imf)[centre])) <= 0.01


def test_sift_sinusoid_plus_trend():
    s = np.sin(2 * np.pi * T / 50)
    imf = sift(s + 0.002 * T)
    c = slice(63, 563)
    assert np.corrcoef(imf[c], s[c])[0, 1] > 0.99


def test_sift_constant_not_siftable():
    with pytest.raises(NotSiftableError):
        sift(np.ones(50))


def test_decompose_examples():
    dec = decompose(np.linspace(0, 1, 50))
    assert len(dec) == 0
    assert_array_equal(dec.residue, np.linspace(0, 1, 50))
    fast = np.sin(2 * np.pi * T / 10)
    slow = np.sin(2 * np.pi * T / 100)
    dec = decompose(fast + slow)
    assert len(dec) >= 2
    c = slice(63, 563)
    assert np.corrcoef(dec.imfs[0][c], fast[c])[0, 1] > 0.95


@pytest.mark.parametrize("mode", list(BoundaryMode))
def test_wti_reconstruction(mode):
    x = load_wti().values
    dec = decompose(x, SiftConfig(boundary_mode=mode))
    assert rel_err(reconstruct(dec), x) <= 1e-8
    mx, mn = find_extrema(dec.residue)
    # sifting stops once either extremum kind has fewer than two members
    assert min(len(mx), len(mn)) < 2 or len(dec) == 12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(list(BoundaryMode)))
def test_reconstruction_property(seed, mode):
    x = np.cumsum(np.random.default_rng(seed).normal(size=200))
    dec = decompose(x, SiftConfig(boundary_mode=mode))
    assert rel_err(reconstruct(dec), x) <= 1e-8


def test_decompose_deterministic():
    x = load_wti().values
    a, b = decompose(x), decompose(x)
    assert len(a) == len(b)
    for u, v in zip(a.components, b.components):
        assert u.tobytes() == v.tobytes()


def test_reconstruct_examples():
    r = np.arange(5.0)
    assert_array_equal(reconstruct(Decomposition((), r)), r)
    assert_array_equal(reconstruct(Decomposition((r,), np.zeros(5))), r)
    with pytest.raises(CorruptDecompositionError):
        reconstruct(Decomposition((np.zeros(4),), r))


def test_sift_config_validation():
    from msfc.exceptions import DataError

    with pytest.raises(DataError):
        SiftConfig(sd_threshold=0)
    with pytest.raises(DataError):
        SiftConfig(max_imfs=0)
