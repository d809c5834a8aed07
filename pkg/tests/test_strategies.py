import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from msfc import load_wti
from msfc.exceptions import CapabilityError, InsufficientDataError
from msfc.nnet import FnnRegressor, TrainConfig
from msfc.series import fit_scaler
from msfc.strategies import (
    LinearRegressor,
    Strategy,
    forecast,
    forecast_direct,
    forecast_iterated,
    forecast_mimo,
    rolling_forecasts,
    train_direct,
    train_iterated,
    train_mimo,
    train_strategy,
)


class Identity:
    """Predicts the most recent input (lag 1 must come first)."""

    supports_multi_output = False

    def fit(self, inputs, targets, key="model"):
        return None

    def predict(self, model, inputs):
        x = np.atleast_2d(inputs)
        return x[:, :1]


class Recorder(LinearRegressor):
    """Linear regressor that logs every prediction input."""

    def __init__(self):
        super().__init__()
        self.calls = []

    def predict(self, model, inputs):
        self.calls.append(np.array(inputs, dtype=float))
        return super().predict(model, inputs)


def ar2_series(n=400):
    x = np.zeros(n)
    x[0], x[1] = 1.0, 0.5
    for t in range(2, n):
        x[t] = 0.6 * x[t - 1] - 0.3 * x[t - 2] + 0.2
    return x


def analytic(x, horizon):
    buf = list(x[-2:])
    for _ in range(horizon):
        buf.append(0.6 * buf[-1] - 0.3 * buf[-2] + 0.2)
    return np.array(buf[2:])


def test_iterated_examples():
    m = train_iterated(np.ones(50), [1], LinearRegressor())
    assert_allclose(forecast_iterated(m, np.ones(50), 3), 1.0, atol=1e-12)
    x = 0.8 ** np.arange(60)
    m = train_iterated(x, [1], LinearRegressor(intercept=False))
    assert abs(m.models[0].coef[0, 0] - 0.8) <= 1e-10
    assert_allclose(forecast_iterated(m, [2.0, 1.0], 3), [0.8, 0.64, 0.512], rtol=1e-10)
    ident = train_iterated(np.arange(40.0), [1, 2], Identity())
    assert_array_equal(forecast_iterated(ident, [3.0, 5.0, 7.0], 4), [7, 7, 7, 7])


def test_iterated_row_count():
    x = load_wti().values[:418]
    reg = LinearRegressor()
    calls = []
    orig_fit = reg.fit
    reg.fit = lambda i, t, key="model": calls.append(len(i)) or orig_fit(i, t, key)
    train_iterated(x, range(1, 37), reg)
    assert calls == [382]


def test_iterated_bookkeeping():
    x = ar2_series()
    rec = Recorder()
    lags = (1, 2, 3, 4, 5)
    m = train_iterated(x, lags, rec)
    rec.calls.clear()
    hist = x[:200]
    out = forecast_iterated(m, hist, 7)
    d = len(lags)
    for h, call in enumerate(rec.calls, start=1):
        seen = call[0]
        n_pred = min(h - 1, d)
        # lag l < h reads forecast h - l; older lags read observations
        for k, l in enumerate(lags):
            expected = out[h - l - 1] if l < h else hist[len(hist) - 1 - (l - h)]
            assert seen[k] == expected
        assert sum(seen[k] in out for k in range(d)) >= n_pred


def test_direct_examples():
    t = np.arange(200.0)
    m = train_direct(t, [1], 3, LinearRegressor())
    assert len(m.models) == 3
    assert_allclose(forecast_direct(m, t[:101]), [101, 102, 103], atol=1e-9)
    m24 = train_direct(t, [1], 24, LinearRegressor())
    assert len(m24.models) == 24


def test_direct_and_mimo_ignore_old_history():
    x = ar2_series()
    for kind in (Strategy.DIRECT, Strategy.MIMO):
        m = train_strategy(kind, x, [1, 2, 3], 4, LinearRegressor())
        h = x[:150].copy()
        a = forecast(m, h)
        h[:-3] = 1e6
        assert_array_equal(forecast(m, h), a)


def test_mimo_examples():
    x = ar2_series()
    m = train_mimo(x, [1, 2], 4, LinearRegressor())
    d = train_direct(x, [1, 2], 4, LinearRegressor())
    assert_allclose(forecast_mimo(m, x[:120]), forecast_direct(d, x[:120]), atol=1e-9)
    for horizon in (4, 8, 12, 16, 20, 24):
        mm = train_mimo(x, [1, 2], horizon, LinearRegressor())
        assert len(forecast_mimo(mm, x[:120])) == horizon
    with pytest.raises(CapabilityError):
        train_mimo(x, [1], 3, Identity())


def test_linear_oracle_all_strategies():
    x = ar2_series()
    hist = x[:300]
    ref = analytic(hist, 12)
    for kind in Strategy:
        m = train_strategy(kind, x, [1, 2], 12, LinearRegressor())
        assert np.max(np.abs(forecast(m, hist, 12) - ref)) <= 1e-6


def test_h1_strategies_bit_identical_with_fnn():
    x = fit_scaler(load_wti().values[:418]).transform(load_wti().values[:418])
    reg = FnnRegressor(5, TrainConfig(seed=3, max_epochs=15, n_restarts=1))
    outs = [forecast(train_strategy(k, x, [1, 2, 4], 1, reg), x) for k in Strategy]
    assert outs[0].tobytes() == outs[1].tobytes() == outs[2].tobytes()


def test_rolling_matches_per_origin_forecasts():
    x = ar2_series() + np.random.default_rng(0).normal(0, 0.01, 400)
    origins = np.arange(50, 390)
    for kind in Strategy:
        m = train_strategy(kind, x[:250], [1, 3], 5, LinearRegressor())
        fs = rolling_forecasts(m, x, origins, 5)
        ref = np.array([forecast(m, x[: o + 1], 5) for o in origins])
        assert_allclose(fs.forecasts, ref, atol=1e-12)
        assert_array_equal(fs.at_lead(2, origins[:5] + 2), fs.forecasts[:5, 1])


def test_history_too_short():
    m = train_iterated(ar2_series(), [1, 5], LinearRegressor())
    with pytest.raises(InsufficientDataError):
        forecast_iterated(m, [1.0, 2.0], 2)
