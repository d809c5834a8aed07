"""Iterated, direct and MIMO multi-step forecasting around any regressor.

A regressor is any object with ``fit(inputs, targets, key) -> model`` and
``predict(model, inputs) -> outputs`` working on 2-D row batches, plus a
``supports_multi_output`` flag.  ``key`` names the task so seeded learners
can derive per-model seeds; models predicting the same lead share a key
(``lead1`` for the iterated model, ``lead{h}`` for direct model ``h``,
``lead1-{H}`` for MIMO), which makes all three strategies coincide at H=1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from .exceptions import CapabilityError, DataError, InsufficientDataError
from .series import D_MAX, Series, build_lag_matrix, lag_inputs, normalize_lags

__all__ = [
    "HorizonForecastSet",
    "LinearRegressor",
    "Regressor",
    "Strategy",
    "StrategyModel",
    "forecast",
    "forecast_direct",
    "forecast_iterated",
    "forecast_mimo",
    "forecast_windows",
    "lead_key",
    "rolling_forecasts",
    "train_direct",
    "train_iterated",
    "train_mimo",
    "train_strategy",
]


class Strategy(str, Enum):
    ITERATED = "iterated"
    DIRECT = "direct"
    MIMO = "mimo"


class Regressor(Protocol):
    supports_multi_output: bool

    def fit(self, inputs: np.ndarray, targets: np.ndarray, key: str = ...): ...

    def predict(self, model, inputs: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class _LinearModel:
    coef: np.ndarray
    intercept: np.ndarray


class LinearRegressor:
    """Exact least-squares affine regressor (reference learner for tests)."""

    supports_multi_output = True

    def __init__(self, intercept: bool = True):
        self.intercept = intercept

    def fit(self, inputs, targets, key="model"):
        x = np.asarray(inputs, dtype=float)
        y = np.asarray(targets, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        design = np.hstack([x, np.ones((len(x), 1))]) if self.intercept else x
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        if self.intercept:
            return _LinearModel(beta[:-1], beta[-1])
        return _LinearModel(beta, np.zeros(y.shape[1]))

    def predict(self, model, inputs):
        return np.atleast_2d(np.asarray(inputs, dtype=float)) @ model.coef + model.intercept


def lead_key(first: int, last: int | None = None) -> str:
    if last is None or last == first:
        return f"lead{first}"
    return f"lead{first}-{last}"


@dataclass(frozen=True, eq=False)
class StrategyModel:
    kind: Strategy
    models: tuple
    lags: tuple
    horizon: int
    regressor: object

    def __post_init__(self):
        if self.kind is Strategy.DIRECT and len(self.models) != self.horizon:
            raise DataError("direct strategy needs exactly one model per lead")
        if self.kind is not Strategy.DIRECT and len(self.models) != 1:
            raise DataError(f"{self.kind.value} strategy holds a single model")

    @property
    def max_lag(self) -> int:
        return max(l[-1] for l in self.lags)


@dataclass(frozen=True, eq=False)
class HorizonForecastSet:
    """Forecast vectors from successive origins.

    ``forecasts[r, h-1]`` is the lead-``h`` forecast made at origin
    ``origins[r]`` (the index of the last observed value).
    """

    origins: np.ndarray
    forecasts: np.ndarray
    horizon: int

    def __post_init__(self):
        if self.forecasts.shape != (len(self.origins), self.horizon):
            raise DataError("forecast matrix shape does not match origins x horizon")
        if np.any(np.diff(self.origins) <= 0):
            raise DataError("origins must be strictly increasing")

    def at_lead(self, lead: int, targets: np.ndarray) -> np.ndarray:
        """Lead-``lead`` forecasts for target indices ``targets``."""
        pos = np.searchsorted(self.origins, np.asarray(targets) - lead)
        if np.any(pos >= len(self.origins)) or np.any(self.origins[pos] != np.asarray(targets) - lead):
            raise DataError(f"no origin available for some lead-{lead} targets")
        return self.forecasts[pos, lead - 1]


def _values(series) -> np.ndarray:
    return series.values if isinstance(series, Series) else np.asarray(series, dtype=float)


def train_iterated(series, lags, regressor) -> StrategyModel:
    lags = normalize_lags(lags)
    lm = build_lag_matrix(_values(series), lags, 1, "single")
    model = regressor.fit(lm.inputs, lm.targets, key=lead_key(1))
    return StrategyModel(Strategy.ITERATED, (model,), (lags,), 1, regressor)


def train_direct(series, lags_per_h, horizon: int, regressor) -> StrategyModel:
    """One model per lead; ``lags_per_h`` is one lag set or a list of ``horizon``."""
    values = _values(series)
    lag_sets = _per_lead_lags(lags_per_h, horizon)
    models = []
    for h, lags in enumerate(lag_sets, start=1):
        lm = build_lag_matrix(values, lags, h, "direct")
        models.append(regressor.fit(lm.inputs, lm.targets, key=lead_key(h)))
    return StrategyModel(Strategy.DIRECT, tuple(models), tuple(lag_sets), horizon, regressor)


def train_mimo(series, lags, horizon: int, regressor) -> StrategyModel:
    if horizon > 1 and not getattr(regressor, "supports_multi_output", False):
        raise CapabilityError(f"{type(regressor).__name__} cannot fit vector targets")
    lags = normalize_lags(lags)
    lm = build_lag_matrix(_values(series), lags, horizon, "multi")
    model = regressor.fit(lm.inputs, lm.targets, key=lead_key(1, horizon))
    return StrategyModel(Strategy.MIMO, (model,), (lags,), horizon, regressor)


def train_strategy(kind, series, lags, horizon: int, regressor) -> StrategyModel:
    kind = Strategy(kind)
    if kind is Strategy.ITERATED:
        return train_iterated(series, lags, regressor)
    if kind is Strategy.DIRECT:
        return train_direct(series, lags, horizon, regressor)
    return train_mimo(series, lags, horizon, regressor)


def _per_lead_lags(lags_per_h, horizon):
    if isinstance(lags_per_h, (int, np.integer)) or (
        len(lags_per_h) > 0 and isinstance(lags_per_h[0], (int, np.integer))
    ):
        return [normalize_lags(lags_per_h)] * horizon
    if len(lags_per_h) != horizon:
        raise DataError(f"need {horizon} lag sets, got {len(lags_per_h)}")
    return [normalize_lags(l) for l in lags_per_h]


def _check_history(values, max_lag):
    if len(values) < max_lag:
        raise InsufficientDataError(f"history of {len(values)} values shorter than max lag {max_lag}")


def _iterate(model: StrategyModel, buffer: np.ndarray, n_obs: int, horizon: int) -> np.ndarray:
    # buffer rows: observed history (n_obs columns) followed by room for forecasts
    lags = np.asarray(model.lags[0])
    reg, fitted = model.regressor, model.models[0]
    for h in range(horizon):
        pos = n_obs + h - 1
        buffer[:, n_obs + h] = reg.predict(fitted, buffer[:, pos + 1 - lags])[:, 0]
    return buffer[:, n_obs:]


def forecast_iterated(model: StrategyModel, history, horizon: int) -> np.ndarray:
    """Recursive forecast: each step's inputs are the most recent values of
    the observed history extended by the forecasts made so far."""
    values = _values(history)
    _check_history(values, model.max_lag)
    window = values[len(values) - model.max_lag :]
    buffer = np.concatenate([window, np.zeros(horizon)])[None, :]
    return _iterate(model, buffer, model.max_lag, horizon)[0].copy()


def forecast_direct(model: StrategyModel, history) -> np.ndarray:
    values = _values(history)
    _check_history(values, model.max_lag)
    origin = np.array([len(values) - 1])
    out = np.empty(model.horizon)
    for h, (fitted, lags) in enumerate(zip(model.models, model.lags)):
        out[h] = model.regressor.predict(fitted, lag_inputs(values, lags, origin))[0, 0]
    return out


def forecast_mimo(model: StrategyModel, history) -> np.ndarray:
    values = _values(history)
    _check_history(values, model.max_lag)
    origin = np.array([len(values) - 1])
    x = lag_inputs(values, model.lags[0], origin)
    return np.asarray(model.regressor.predict(model.models[0], x))[0, : model.horizon].copy()


def forecast(model: StrategyModel, history, horizon: int | None = None) -> np.ndarray:
    if model.kind is Strategy.ITERATED:
        return forecast_iterated(model, history, horizon or model.horizon)
    if model.kind is Strategy.DIRECT:
        return forecast_direct(model, history)
    return forecast_mimo(model, history)


def forecast_windows(model: StrategyModel, windows, horizon: int | None = None) -> np.ndarray:
    """Forecast vectors for a batch of history windows.

    ``windows[r]`` holds the most recent observed values at origin ``r``,
    oldest first, so lag ``l`` reads ``windows[r, -l]``.  Each window must
    cover the model's maximum lag.  Returns shape ``(R, horizon)``.
    """
    w = np.atleast_2d(np.asarray(windows, dtype=float))
    horizon = horizon or model.horizon
    if model.kind is not Strategy.ITERATED and horizon != model.horizon:
        raise DataError("direct and MIMO models forecast their trained horizon only")
    width = w.shape[1]
    if width < model.max_lag:
        raise InsufficientDataError(f"windows of {width} values shorter than max lag {model.max_lag}")
    if model.kind is Strategy.ITERATED:
        d = model.max_lag
        buffer = np.zeros((len(w), d + horizon))
        buffer[:, :d] = w[:, width - d :]
        return _iterate(model, buffer, d, horizon).copy()
    if model.kind is Strategy.DIRECT:
        cols = [
            model.regressor.predict(fitted, w[:, width - np.asarray(lags)])[:, 0]
            for fitted, lags in zip(model.models, model.lags)
        ]
        return np.column_stack(cols)
    x = w[:, width - np.asarray(model.lags[0])]
    return np.array(np.asarray(model.regressor.predict(model.models[0], x))[:, :horizon], dtype=float)


def rolling_forecasts(model: StrategyModel, values, origins, horizon: int | None = None) -> HorizonForecastSet:
    """Forecast vectors from every origin in ``origins`` using observed values only.

    Equivalent to calling :func:`forecast` on ``values[: origin + 1]`` for each
    origin, but batched across origins.
    """
    values = np.asarray(_values(values), dtype=float)
    origins = np.asarray(origins, dtype=int)
    horizon = horizon or model.horizon
    if origins.min() < model.max_lag - 1 or origins.max() >= len(values):
        raise InsufficientDataError("origin outside the range supported by the history")
    d = model.max_lag
    windows = lag_inputs(values, range(d, 0, -1), origins)
    out = forecast_windows(model, windows, horizon)
    return HorizonForecastSet(origins.copy(), np.array(out, dtype=float), horizon)
