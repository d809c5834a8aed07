import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from msfc import load_wti
from msfc.exceptions import DegenerateScaleError, InsufficientDataError, InvalidSplitError
from msfc.series import MinMaxScaler, Series, SplitSpec, build_lag_matrix, fit_scaler, split

import oracles


def ramp(n):
    return Series.from_values(np.arange(1.0, n + 1))


def test_series_invariants():
    with pytest.raises(ValueError):
        Series.from_values([1.0])
    with pytest.raises(ValueError):
        Series.from_values([1.0, np.nan])
    with pytest.raises(ValueError):
        Series(np.array(["2000-01-07", "2000-01-07"], dtype="datetime64[D]"), [1.0, 2.0])
    s = ramp(3)
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_wti_split_dates():
    est, hold = split(load_wti(), SplitSpec(418, 208))
    assert str(est.timestamps[-1]) == "2008-01-04"
    assert str(hold.timestamps[0]) == "2008-01-11"
    assert len(est) == 418 and len(hold) == 208


def test_split_minimal_and_ramp():
    est, hold = split(ramp(2), SplitSpec(1, 1))
    assert_array_equal(est.values, [1.0])
    assert_array_equal(hold.values, [2.0])
    est, hold = split(ramp(10), SplitSpec(7, 3))
    assert_array_equal(est.values, np.arange(1.0, 8))
    assert_array_equal(hold.values, [8.0, 9.0, 10.0])


def test_split_lossless_and_mismatch():
    s = load_wti()
    est, hold = split(s, SplitSpec())
    assert est.concat(hold) == s
    with pytest.raises(InvalidSplitError):
        split(ramp(10), SplitSpec(7, 4))


def test_scaler_examples():
    sc = fit_scaler(np.array([0.0, 10.0]))
    assert (sc.lo, sc.hi) == (0.0, 10.0)
    assert sc.transform(5.0) == 0.5
    sc = fit_scaler(np.array([20.0, 30.0, 25.0]))
    assert sc.transform(30.0) == 1.0 and sc.transform(20.0) == 0.0
    with pytest.raises(DegenerateScaleError):
        fit_scaler(np.array([3.0, 3.0, 3.0]))


def test_scaler_holdout_above_one():
    s = load_wti()
    est, hold = split(s, SplitSpec())
    sc = fit_scaler(est)
    # the mid-2008 peak exceeds every estimation-sample price
    assert sc.transform(hold.values.max()) > 1.0


@given(st.floats(-1e6, 1e6), st.floats(1e-3, 1e6), st.floats(0, 1))
def test_scaler_round_trip(lo, span, frac):
    sc = MinMaxScaler(lo, lo + span)
    x = lo + frac * span
    assert abs(sc.inverse_transform(sc.transform(x)) - x) <= 1e-12 * max(1.0, abs(x)) + 1e-12 * span


def test_lag_matrix_examples():
    x = np.arange(1.0, 11)
    lm = build_lag_matrix(x, [1, 2], 1, "single")
    assert_array_equal(lm.inputs[0], [2.0, 1.0])
    assert_array_equal(lm.targets[0], [3.0])
    lm = build_lag_matrix(x, [1], 3, "multi")
    assert_array_equal(lm.inputs[0], [1.0])
    assert_array_equal(lm.targets[0], [2.0, 3.0, 4.0])
    lm = build_lag_matrix(np.arange(7.0), [1, 4], 3, "direct")
    assert len(lm) == 1
    with pytest.raises(InsufficientDataError):
        build_lag_matrix(np.arange(6.0), [1, 4], 3, "direct")


def test_lag_matrix_rejects_large_lag():
    with pytest.raises(ValueError):
        build_lag_matrix(np.arange(100.0), [37], 1, "single")


@settings(max_examples=50, deadline=None)
@given(
    st.integers(5, 40),
    st.lists(st.integers(1, 6), min_size=1, max_size=4, unique=True),
    st.integers(1, 4),
    st.sampled_from(["single", "direct", "multi"]),
)
def test_lag_matrix_matches_enumeration(n, lags, horizon, mode):
    if mode == "single":
        horizon = 1
    if n < max(lags) + horizon:
        return
    x = np.random.default_rng(n).normal(size=n)
    lm = build_lag_matrix(x, lags, horizon, mode)
    lags = sorted(lags)
    rows, targets = oracles.lag_rows(x, lags, horizon, mode)
    assert len(lm) == n - max(lags) - horizon + 1 == len(rows)
    assert_allclose(lm.inputs, rows, rtol=0, atol=0)
    assert_allclose(lm.targets, targets, rtol=0, atol=0)
