"""Model zoo, the EMD ensemble forecaster and the experiment runner.

Four techniques are compared: the naive random walk, a plain FNN on the
price series, and two EMD ensembles that model every decomposition component
with its own FNN and combine the component forecasts with an aggregation
FNN.  The two ensembles differ only in how sifting treats the series ends
(``truncate`` for EMD-FNN, the slope-based method for EMD-SBM-FNN).

Experiments are run phase by phase (decomposition, lag selection, training,
aggregation, forecasting).  Every task in a phase is a pure function of its
inputs and a derived seed, so results do not depend on ``jobs``.
"""

from __future__ import annotations

import hashlib
import logging
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy

from . import __version__
from ._seeding import derive_seed
from .emd import BoundaryMode, SiftConfig, decompose
from .exceptions import ConfigError, DataError, DegenerateScaleError, MsfcError
from .metrics import EvaluationFrame, ds, mase, smape
from .nnet import FnnRegressor, TrainConfig
from .selection import Criterion, SelectionCriterion, select_lags
from .series import D_MAX, MinMaxScaler, Series, SplitSpec, build_lag_matrix, fit_scaler, lag_inputs
from .spa import LossKind, LossSeries, SpaConfig, per_observation_losses, spa_matrix
from .strategies import HorizonForecastSet, Strategy, StrategyModel, forecast_windows, lead_key

log = logging.getLogger(__name__)

__all__ = [
    "AggregationMode",
    "DecompositionScope",
    "DsReference",
    "EnsembleModel",
    "EvaluationMode",
    "ExperimentConfig",
    "ExperimentReport",
    "ModelSpec",
    "Technique",
    "emd_ensemble_forecast",
    "emd_ensemble_train",
    "ensemble_rolling_forecasts",
    "evaluate_forecasts",
    "random_walk_forecast",
    "run_experiment",
]

METRICS = ("smape", "mase", "ds")


class Technique(str, Enum):
    RANDOM_WALK = "random_walk"
    FNN = "fnn"
    EMD_FNN = "emd_fnn"
    EMD_SBM_FNN = "emd_sbm_fnn"

    @property
    def boundary_mode(self) -> BoundaryMode | None:
        return {
            Technique.EMD_FNN: BoundaryMode.TRUNCATE,
            Technique.EMD_SBM_FNN: BoundaryMode.SBM,
        }.get(self)

    @property
    def uses_emd(self) -> bool:
        return self.boundary_mode is not None


class DecompositionScope(str, Enum):
    """Which data the forecast-time decompositions see.

    ``rolling``: the whole history up to each origin.  ``estimation``: a
    sliding window as long as the estimation sample, ending at the origin.
    ``full``: one decomposition of the entire series (leaks the future).
    """

    ROLLING = "rolling"
    ESTIMATION = "estimation"
    FULL = "full"


class AggregationMode(str, Enum):
    FNN = "fnn"
    SUMMATION = "sum"


class EvaluationMode(str, Enum):
    """``pooled`` averages each metric over leads 1..H; ``lead`` uses lead H only."""

    POOLED = "pooled"
    LEAD = "lead"


class DsReference(str, Enum):
    """Reference value for directional symmetry: the actual one step before
    the target (``previous``) or the last value at the forecast origin."""

    PREVIOUS = "previous"
    ORIGIN = "origin"


ALL_TECHNIQUES = tuple(Technique)
ALL_STRATEGIES = tuple(Strategy)


@dataclass(frozen=True)
class ModelSpec:
    technique: Technique
    strategy: Strategy | None
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "technique", Technique(self.technique))
        if self.technique is Technique.RANDOM_WALK:
            object.__setattr__(self, "strategy", None)
        else:
            object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")

    @property
    def label(self) -> str:
        if self.strategy is None:
            return self.technique.value
        return f"{self.technique.value}_{self.strategy.value}"

    @property
    def file_stem(self) -> str:
        strategy = "naive" if self.strategy is None else self.strategy.value
        return f"{self.technique.value}_{strategy}_H{self.horizon}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment's output."""

    horizons: tuple = (4, 8, 12, 16, 20, 24)
    split: SplitSpec = field(default_factory=SplitSpec)
    base_seed: int = 0
    n_seeded_runs: int = 5
    techniques: tuple = ALL_TECHNIQUES
    strategies: tuple = ALL_STRATEGIES
    decomposition_scope: DecompositionScope = DecompositionScope.ROLLING
    aggregation_mode: AggregationMode = AggregationMode.FNN
    evaluation: EvaluationMode = EvaluationMode.POOLED
    ds_reference: DsReference = DsReference.PREVIOUS
    spa: SpaConfig = field(default_factory=SpaConfig)
    sift: SiftConfig = field(default_factory=SiftConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    n_hidden: int = 15
    hidden_grid: tuple = ()
    share_direct_lags: bool = False
    d_max: int = D_MAX
    jobs: int = 1

    def __post_init__(self):
        coerce = {
            "decomposition_scope": DecompositionScope,
            "aggregation_mode": AggregationMode,
            "evaluation": EvaluationMode,
            "ds_reference": DsReference,
        }
        for name, kind in coerce.items():
            object.__setattr__(self, name, kind(getattr(self, name)))
        horizons = tuple(sorted({int(h) for h in self.horizons}))
        if not horizons or horizons[0] < 1 or horizons[-1] > 52:
            raise ConfigError("horizons must be a non-empty subset of 1..52")
        object.__setattr__(self, "horizons", horizons)
        object.__setattr__(self, "techniques", tuple(dict.fromkeys(Technique(t) for t in self.techniques)))
        object.__setattr__(self, "strategies", tuple(dict.fromkeys(Strategy(s) for s in self.strategies)))
        object.__setattr__(self, "hidden_grid", tuple(int(h) for h in self.hidden_grid))
        if not self.techniques:
            raise ConfigError("no technique selected")
        if self.n_seeded_runs < 1 or self.jobs < 1 or self.n_hidden < 1:
            raise ConfigError("n_seeded_runs, jobs and n_hidden must be >= 1")
        if not 1 <= self.d_max <= D_MAX:
            raise ConfigError(f"d_max must lie in 1..{D_MAX}")

    def model_specs(self) -> list[ModelSpec]:
        specs = []
        for h in self.horizons:
            for tech in self.techniques:
                if tech is Technique.RANDOM_WALK:
                    specs.append(ModelSpec(tech, None, h))
                else:
                    specs.extend(ModelSpec(tech, s, h) for s in self.strategies)
        return specs

    def describe(self) -> list[str]:
        """``key = value`` lines echoing every setting that can change results
        (nested configs flattened; the worker count is left out)."""
        lines = []
        for f in fields(self):
            if f.name == "jobs":
                continue
            value = getattr(self, f.name)
            if hasattr(value, "__dataclass_fields__"):
                for sub in fields(value):
                    lines.append(f"{f.name}.{sub.name} = {_plain(getattr(value, sub.name))}")
            else:
                lines.append(f"{f.name} = {_plain(value)}")
        return lines


def _plain(value) -> str:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, tuple):
        return ",".join(_plain(v) for v in value)
    return str(value)


# ---------------------------------------------------------------------------
# random walk


def random_walk_forecast(history, horizon: int) -> np.ndarray:
    """``horizon`` copies of the last observed value."""
    values = history.values if isinstance(history, Series) else np.asarray(history, dtype=float)
    if values.size == 0:
        raise DataError("random walk needs a non-empty history")
    if horizon < 1:
        raise DataError("horizon must be >= 1")
    return np.full(horizon, float(values[-1]))


def random_walk_rolling(prices, origins, horizon: int) -> HorizonForecastSet:
    prices = np.asarray(prices, dtype=float)
    origins = np.asarray(origins, dtype=int)
    return HorizonForecastSet(origins.copy(), np.repeat(prices[origins, None], horizon, axis=1), horizon)


# ---------------------------------------------------------------------------
# channels: the series (plain FNN) or its decomposition components


def match_channels(imfs: Sequence[np.ndarray], residue: np.ndarray, n_channels: int) -> np.ndarray:
    """Map a decomposition onto ``n_channels`` fixed channels.

    The first ``n_channels - 1`` channels take IMFs in order; the last takes
    the residue plus any surplus IMFs.  Missing IMF channels are zero.
    """
    out = np.zeros((n_channels, len(residue)))
    k = n_channels - 1
    for i, imf in enumerate(imfs[:k]):
        out[i] = imf
    out[k] = residue
    for imf in imfs[k:]:
        out[k] = out[k] + imf
    return out


def _channel_names(n: int, emd: bool) -> tuple:
    if not emd:
        return ("price",)
    return tuple(f"imf{i + 1}" for i in range(n - 1)) + ("residue",)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Training data of one technique: raw channel values over the training
    span and their min-max scalers.  ``persistent[c]`` marks channels too
    degenerate to model, which are forecast by persistence."""

    names: tuple
    raw: np.ndarray
    scalers: tuple
    persistent: tuple

    @property
    def scaled(self) -> np.ndarray:
        return np.vstack([s.transform(r) for s, r in zip(self.scalers, self.raw)])

    def __len__(self):
        return len(self.names)


def _safe_scaler(values) -> tuple[MinMaxScaler, bool]:
    try:
        return fit_scaler(values), False
    except DegenerateScaleError:
        lo = float(np.min(values))
        return MinMaxScaler(lo, lo + 1.0), True


def training_channels(train_values, technique: Technique, sift: SiftConfig, d_max: int) -> ChannelSet:
    values = np.asarray(train_values, dtype=float)
    if technique.uses_emd:
        dec = decompose(values, replace(sift, boundary_mode=technique.boundary_mode))
        raw = match_channels(dec.imfs, dec.residue, len(dec.imfs) + 1)
    else:
        raw = values[None, :]
    scalers, persistent = [], []
    for r in raw:
        scaler, degenerate = _safe_scaler(r)
        scalers.append(scaler)
        # too short to model, or nothing to learn from
        persistent.append(degenerate or len(r) < d_max + 30)
    return ChannelSet(_channel_names(len(raw), technique.uses_emd), raw, tuple(scalers), tuple(persistent))


def history_windows(
    prices,
    origins,
    width: int,
    technique: Technique,
    sift: SiftConfig,
    scope: DecompositionScope,
    n_channels: int,
    window: int,
) -> tuple[np.ndarray, int]:
    """Raw channel values of the ``width`` most recent points at each origin.

    Returns ``(windows, n_drift)``: an array of shape ``(channels, origins,
    width)`` and the number of origins whose decomposition did not have the
    trained channel count.
    """
    prices = np.asarray(prices, dtype=float)
    origins = np.asarray(origins, dtype=int)
    back = np.arange(width - 1, -1, -1)
    if not technique.uses_emd:
        return prices[origins[:, None] - back[None, :]][None, :, :], 0
    cfg = replace(sift, boundary_mode=technique.boundary_mode)
    if scope is DecompositionScope.FULL:
        dec = decompose(prices, cfg)
        drift = int(len(dec.imfs) + 1 != n_channels)
        full = match_channels(dec.imfs, dec.residue, n_channels)
        return full[:, origins[:, None] - back[None, :]], drift * len(origins)
    out = np.empty((n_channels, len(origins), width))
    n_drift = 0
    for r, o in enumerate(origins):
        start = 0 if scope is DecompositionScope.ROLLING else max(0, o + 1 - window)
        dec = decompose(prices[start : o + 1], cfg)
        n_drift += len(dec.imfs) + 1 != n_channels
        out[:, r, :] = match_channels(dec.imfs, dec.residue, n_channels)[:, -width:]
    return out, n_drift


# ---------------------------------------------------------------------------
# ensemble model


@dataclass(frozen=True, eq=False)
class EnsembleModel:
    """A trained forecaster for one technique and strategy.

    The plain FNN is the one-channel case without an aggregator.
    ``channel_models[c]`` is ``None`` for persistence channels.
    """

    technique: Technique
    strategy: Strategy
    horizon: int
    price_scaler: MinMaxScaler
    channels: ChannelSet
    channel_models: tuple
    aggregation: AggregationMode
    aggregator: object
    regressor: FnnRegressor
    sift: SiftConfig
    scope: DecompositionScope
    window: int
    width: int

    @property
    def n_channels(self) -> int:
        return len(self.channels)


def _channel_forecasts(model: EnsembleModel, windows: np.ndarray, horizon: int) -> np.ndarray:
    """Scaled per-channel forecasts, shape ``(channels, origins, horizon)``."""
    out = np.empty((model.n_channels, windows.shape[1], horizon))
    for c in range(model.n_channels):
        scaled = model.channels.scalers[c].transform(windows[c])
        sm = model.channel_models[c]
        if sm is None:
            out[c] = scaled[:, -1:]
        else:
            out[c] = forecast_windows(sm, scaled, horizon)
    return out


def combine_channels(model: EnsembleModel, scaled_fc: np.ndarray) -> np.ndarray:
    """Price-scale forecasts ``(origins, horizon)`` from scaled channel forecasts."""
    if not model.technique.uses_emd:
        return model.price_scaler.inverse_transform(scaled_fc[0])
    if model.aggregation is AggregationMode.SUMMATION or model.aggregator is None:
        parts = [s.inverse_transform(f) for s, f in zip(model.channels.scalers, scaled_fc)]
        return np.sum(parts, axis=0)
    n_origins, horizon = scaled_fc.shape[1:]
    out = np.empty((n_origins, horizon))
    for h in range(horizon):
        x = scaled_fc[:, :, h].T
        out[:, h] = model.regressor.predict(model.aggregator, x)[:, 0]
    return model.price_scaler.inverse_transform(out)


def ensemble_rolling_forecasts(model: EnsembleModel, prices, origins, horizon: int | None = None) -> HorizonForecastSet:
    """Forecast vectors from each origin, on the price scale."""
    horizon = horizon or model.horizon
    origins = np.asarray(origins, dtype=int)
    windows, n_drift = history_windows(
        prices, origins, model.width, model.technique, model.sift, model.scope, model.n_channels, model.window
    )
    if n_drift:
        log.info("%s: %d origins changed component count; order-matched", model.technique.value, n_drift)
    fc = combine_channels(model, _channel_forecasts(model, windows, horizon))
    return HorizonForecastSet(origins.copy(), np.asarray(fc, dtype=float), horizon)


def emd_ensemble_forecast(model: EnsembleModel, history, horizon: int | None = None) -> np.ndarray:
    """Forecast ``horizon`` values after the end of ``history``."""
    prices = history.values if isinstance(history, Series) else np.asarray(history, dtype=float)
    if len(prices) < max(8, model.width):
        raise DataError(f"history needs at least {max(8, model.width)} values")
    return ensemble_rolling_forecasts(model, prices, [len(prices) - 1], horizon).forecasts[0]


# ---------------------------------------------------------------------------
# pure tasks (run serially or in worker processes)


def _timed(fn: Callable, *args):
    """``(ok, value_or_reason, seconds)``; package errors become failures."""
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            value = fn(*args)
        return True, value, time.perf_counter() - t0
    except (MsfcError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return False, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0


def _select_task(values, kind: str, n: int, seed: int, d_max: int):
    if kind == "pmi":
        crit = SelectionCriterion(Criterion.PMI)
        return select_lags(values, lead=n, criterion=crit, d_max=d_max, seed=seed).lags
    crit = SelectionCriterion(Criterion.DELTA)
    return select_lags(values, horizon=n, criterion=crit, d_max=d_max, seed=seed).lags


def _fit_task(values, lags, kind: str, n: int, regressor: FnnRegressor):
    if kind == "lead":
        mode = "single" if n == 1 else "direct"
        lm = build_lag_matrix(values, lags, n, mode)
        return regressor.fit(lm.inputs, lm.targets, key=lead_key(n))
    lm = build_lag_matrix(values, lags, n, "multi")
    return regressor.fit(lm.inputs, lm.targets, key=lead_key(1, n))


def _aggregator_rows(scaled_channels: np.ndarray, price_scaled: np.ndarray, lead1: Sequence, regressor):
    """In-sample lead-1 fitted values of every channel and the price target."""
    max_lag = max((lags[-1] for lags, fitted in lead1 if fitted is not None), default=1)
    origins = np.arange(max_lag - 1, scaled_channels.shape[1] - 1)
    cols = []
    for c, (lags, fitted) in enumerate(lead1):
        if fitted is None:
            cols.append(scaled_channels[c, origins])
        else:
            x = lag_inputs(scaled_channels[c], lags, origins)
            cols.append(regressor.predict(fitted, x)[:, 0])
    return np.column_stack(cols), price_scaled[origins + 1]


def _aggregator_task(scaled_channels, price_scaled, lead1, regressor):
    x, y = _aggregator_rows(scaled_channels, price_scaled, lead1, regressor)
    return regressor.fit(x, y, key="aggregator")


def _forecast_task(model: EnsembleModel, windows: np.ndarray, origins: np.ndarray, horizon: int):
    fc = combine_channels(model, _channel_forecasts(model, windows, horizon))
    return HorizonForecastSet(origins.copy(), np.asarray(fc, dtype=float), horizon)


def _call(job):
    fn, args = job
    return _timed(fn, *args)


def _run_jobs(jobs: list, n_workers: int) -> list:
    if n_workers <= 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_call, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))


# ---------------------------------------------------------------------------
# one-shot training


def _regressor(config: ExperimentConfig, run: int, technique: Technique, channel: int | str) -> FnnRegressor:
    seed = derive_seed(config.base_seed, "run", run, technique.value, channel)
    return FnnRegressor(config.n_hidden, replace(config.train, seed=seed), config.hidden_grid)


def _lead_plan(strategy: Strategy, horizon: int, share: bool) -> list[tuple[str, int, str, int]]:
    """``(select_kind, select_n, fit_kind, fit_n)`` artifacts a channel needs."""
    if strategy is Strategy.ITERATED:
        return [("pmi", 1, "lead", 1)]
    if strategy is Strategy.DIRECT:
        return [("pmi", 1 if share else h, "lead", h) for h in range(1, horizon + 1)]
    return [("delta", horizon, "mimo", horizon)]


def emd_ensemble_train(
    series,
    strategy,
    horizon: int,
    sbm: bool = True,
    seed: int = 0,
    config: ExperimentConfig | None = None,
    technique: Technique | None = None,
) -> EnsembleModel:
    """Train an ensemble forecaster on the estimation sample of ``series``.

    ``series`` may be the estimation sample itself (when ``config.split``
    does not match its length) or the full series.  ``technique`` overrides
    ``sbm`` and may be ``Technique.FNN`` for the plain network.
    """
    config = config or ExperimentConfig()
    prices = series.values if isinstance(series, Series) else np.asarray(series, dtype=float)
    n_est = config.split.n_estimation if len(prices) == config.split.total else len(prices)
    tech = technique or (Technique.EMD_SBM_FNN if sbm else Technique.EMD_FNN)
    if tech is Technique.RANDOM_WALK:
        raise ConfigError("the random walk needs no training")
    strategy = Strategy(strategy)
    train_values = prices if config.decomposition_scope is DecompositionScope.FULL else prices[:n_est]
    channels = training_channels(train_values, tech, config.sift, config.d_max)
    if config.decomposition_scope is DecompositionScope.FULL:
        channels = _truncate_channels(channels, n_est)
    return _assemble(config, tech, strategy, horizon, prices[:n_est], channels, seed)


def _truncate_channels(ch: ChannelSet, n: int) -> ChannelSet:
    raw = ch.raw[:, :n]
    scalers, persistent = zip(*(_safe_scaler(r) for r in raw))
    persistent = tuple(p or q for p, q in zip(persistent, ch.persistent))
    return ChannelSet(ch.names, raw, tuple(scalers), persistent)


def _assemble(config, tech, strategy, horizon, estimation, channels: ChannelSet, run: int) -> EnsembleModel:
    price_scaler = fit_scaler(estimation)
    scaled = channels.scaled
    models = []
    for c in range(len(channels)):
        if channels.persistent[c]:
            models.append(None)
            continue
        reg = _regressor(config, run, tech, c)
        fitted, lag_sets = [], []
        for sk, sn, fk, fn in _lead_plan(strategy, horizon, config.share_direct_lags):
            seed = derive_seed(config.base_seed, "select", tech.value, c, sk, sn)
            lags = _select_task(scaled[c], sk, sn, seed, config.d_max)
            fitted.append(_fit_task(scaled[c], lags, fk, fn, reg))
            lag_sets.append(lags)
        models.append(StrategyModel(strategy, tuple(fitted), tuple(lag_sets), horizon, reg))
    agg_reg = _regressor(config, run, tech, "aggregator")
    aggregator = None
    if tech.uses_emd and config.aggregation_mode is AggregationMode.FNN:
        # the first model of every strategy yields lead-1 fitted values
        lead1 = [((), None) if sm is None else (sm.lags[0], sm.models[0]) for sm in models]
        aggregator = _aggregator_task(scaled, price_scaler.transform(estimation), lead1, agg_reg)
    return EnsembleModel(
        tech, strategy, horizon, price_scaler, channels, tuple(models), config.aggregation_mode,
        aggregator, agg_reg, config.sift, config.decomposition_scope, len(estimation), config.d_max,
    )


# ---------------------------------------------------------------------------
# evaluation


def _eval_origins(n_est: int, n_hold: int, horizon: int, mode: EvaluationMode) -> np.ndarray:
    last = n_est + n_hold - 2 if mode is EvaluationMode.POOLED else n_est + n_hold - 1 - horizon
    return np.arange(n_est - horizon, last + 1)


def evaluate_forecasts(
    fset: HorizonForecastSet,
    prices,
    n_estimation: int,
    horizon: int,
    mode: EvaluationMode = EvaluationMode.POOLED,
    ds_reference: DsReference = DsReference.PREVIOUS,
) -> tuple[dict, dict]:
    """Metrics and per-target losses over the holdout.

    Returns ``(metrics, losses)`` where ``metrics`` maps smape/mase/ds to a
    value and ``losses`` maps each :class:`LossKind` to an array with one
    loss per holdout target.  Pooled mode averages both over leads 1..H.
    """
    prices = np.asarray(prices, dtype=float)
    targets = np.arange(n_estimation, len(prices))
    estimation = prices[:n_estimation]
    leads = range(1, horizon + 1) if EvaluationMode(mode) is EvaluationMode.POOLED else [horizon]
    metrics = {m: [] for m in METRICS}
    losses = {k: [] for k in LossKind}
    for h in leads:
        prev_idx = targets - 1 if DsReference(ds_reference) is DsReference.PREVIOUS else targets - h
        frame = EvaluationFrame(prices[targets], fset.at_lead(h, targets), prices[prev_idx], estimation)
        metrics["smape"].append(smape(frame))
        metrics["mase"].append(mase(frame))
        metrics["ds"].append(ds(frame))
        for k in LossKind:
            losses[k].append(per_observation_losses(frame, k).losses)
    return (
        {m: float(np.mean(v)) for m, v in metrics.items()},
        {k: np.mean(v, axis=0) for k, v in losses.items()},
    )


# ---------------------------------------------------------------------------
# experiment


@dataclass(eq=False)
class ExperimentReport:
    """Per-run and across-run results of an experiment.

    ``accuracy[(run, metric, horizon, label)]`` holds metric values,
    ``spa[(run, loss, horizon, label)]`` an :class:`~msfc.spa.SpaResult`,
    ``timing[(run, horizon, label)]`` accounted seconds, and
    ``forecasts[(horizon, label)]`` the first run's forecast set.  Failed
    cells appear in ``failures`` as ``(run, horizon, label, reason)``.
    """

    config: ExperimentConfig
    specs: list
    dates: np.ndarray
    prices: np.ndarray
    accuracy: dict = field(default_factory=dict)
    spa: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    forecasts: dict = field(default_factory=dict)
    lags: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[str]:
        return list(dict.fromkeys(s.label for s in self.specs))

    @property
    def runs(self) -> range:
        return range(self.config.n_seeded_runs)

    def median_accuracy(self, metric: str, horizon: int, label: str) -> float:
        return _median([self.accuracy.get((r, metric, horizon, label)) for r in self.runs])

    def median_timing(self, horizon: int, label: str) -> float:
        return _median([self.timing.get((r, horizon, label)) for r in self.runs])

    def median_spa(self, loss: str, horizon: int, label: str) -> float:
        vals = [self.spa.get((r, LossKind(loss), horizon, label)) for r in self.runs]
        return _median([v.p_value if v is not None else None for v in vals])

    def write(self, out_dir) -> list[Path]:
        from .report import write_report

        return write_report(self, out_dir)


def _median(values) -> float:
    vals = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.median(vals)) if vals else float("nan")


def run_experiment(config: ExperimentConfig, series: Series, progress: Callable[[str], None] | None = None) -> ExperimentReport:
    """Run every configured model variant over every horizon and seeded run."""
    say = progress or (lambda msg: log.info(msg))
    prices = np.asarray(series.values, dtype=float)
    spec = config.split
    if spec.total != len(prices):
        raise DataError(f"split {spec.n_estimation}+{spec.n_holdout} does not match {len(prices)} observations")
    n_est, n_hold = spec.n_estimation, spec.n_holdout
    h_max = config.horizons[-1]
    if n_est - h_max < config.d_max or n_hold < 2:
        raise DataError("estimation sample too short for the maximum lag and horizon")
    estimation = prices[:n_est]
    report = ExperimentReport(config, config.model_specs(), np.asarray(series.timestamps), prices)
    report.provenance = _provenance(config, prices)
    all_origins = np.arange(n_est - h_max, n_est + n_hold - 1)
    learned = [t for t in config.techniques if t is not Technique.RANDOM_WALK]
    # the random walk needs no scaling, so constant data still gets its forecasts
    price_scaler = fit_scaler(estimation) if learned else None
    secs: dict = {}

    # phase 1: training channels and forecast-time windows (seed independent)
    say("decomposing")
    full_scope = config.decomposition_scope is DecompositionScope.FULL
    jobs = [(training_channels, (prices if full_scope else estimation, t, config.sift, config.d_max)) for t in learned]
    channels: dict = {}
    broken: dict = {}
    for t, (ok, value, s) in zip(learned, _run_jobs(jobs, config.jobs)):
        secs[("dec", t)] = s
        if ok:
            channels[t] = _truncate_channels(value, n_est) if full_scope else value
        else:
            broken[t] = value
    jobs, keys = [], []
    for t, ch in channels.items():
        # chunk origins so rolling decompositions spread over workers
        for chunk in np.array_split(all_origins, max(1, min(config.jobs, len(all_origins)))):
            args = (prices, chunk, config.d_max, t, config.sift, config.decomposition_scope, len(ch), n_est)
            jobs.append((history_windows, args))
            keys.append(t)
    windows: dict = {}
    for t, (ok, value, s) in zip(keys, _run_jobs(jobs, config.jobs)):
        secs[("win", t)] = secs.get(("win", t), 0.0) + s
        if not ok:
            broken[t] = value
        elif t not in broken:
            windows.setdefault(t, []).append(value)
    for t in list(windows):
        if t in broken:
            continue
        parts = windows[t]
        windows[t] = np.concatenate([p[0] for p in parts], axis=1)
        report.provenance[f"channel_drift_origins.{t.value}"] = str(sum(p[1] for p in parts))

    # phase 2: lag selection (seed independent, shared by all runs)
    needs_agg = config.aggregation_mode is AggregationMode.FNN
    plan: dict = {}
    for t, ch in channels.items():
        for strat in config.strategies:
            for h in config.horizons:
                plan[(t, strat, h)] = _lead_plan(strat, h, config.share_direct_lags)
    sel_keys = set()
    for (t, strat, h), items in plan.items():
        for c in range(len(channels[t])):
            if channels[t].persistent[c]:
                continue
            sel_keys.update((t, c, sk, sn) for sk, sn, _, _ in items)
    sel_keys = sorted(sel_keys, key=lambda k: (k[0].value, k[1], k[2], k[3]))
    say(f"selecting lags ({len(sel_keys)} searches)")
    scaled = {t: ch.scaled for t, ch in channels.items()}
    jobs = [
        (_select_task, (scaled[t][c], sk, sn, derive_seed(config.base_seed, "select", t.value, c, sk, sn), config.d_max))
        for t, c, sk, sn in sel_keys
    ]
    selected: dict = {}
    for key, (ok, value, s) in zip(sel_keys, _run_jobs(jobs, config.jobs)):
        secs[("sel",) + key] = s
        selected[key] = value if ok else None
        if not ok:
            log.warning("lag selection %s failed: %s", key, value)
    for t, c, sk, sn in sel_keys:
        lags = selected[(t, c, sk, sn)]
        report.lags.append((t.value, channels[t].names[c], sk, sn, lags))

    rw_cache: dict = {}
    for run in report.runs:
        run_losses: dict = {}
        say(f"run {run + 1}/{config.n_seeded_runs}: training")
        # phase 3: component models
        fit_keys = set()
        for (t, strat, h), items in plan.items():
            for c in range(len(channels[t])):
                if channels[t].persistent[c]:
                    continue
                for sk, sn, fk, fn in items:
                    fit_keys.add((t, c, sk, sn, fk, fn))
        fit_keys = sorted(fit_keys, key=lambda k: (k[0].value,) + k[1:])
        jobs, live = [], []
        for key in fit_keys:
            t, c, sk, sn, fk, fn = key
            lags = selected.get((t, c, sk, sn))
            if lags is None:
                continue
            jobs.append((_fit_task, (scaled[t][c], lags, fk, fn, _regressor(config, run, t, c))))
            live.append(key)
        fitted: dict = {}
        for key, (ok, value, s) in zip(live, _run_jobs(jobs, config.jobs)):
            secs[("fit", run) + key] = s
            if ok:
                fitted[key] = value
            else:
                log.warning("training %s failed: %s", key, value)

        # phase 4: aggregators, one per technique and lead-1 source model
        aggs: dict = {}
        if needs_agg:
            sources = sorted(
                {(t, items[0]) for (t, strat, h), items in plan.items() if t.uses_emd},
                key=lambda k: (k[0].value,) + k[1],
            )
            jobs, live = [], []
            for t, item in sources:
                ch = channels[t]
                lead1 = []
                for c in range(len(ch)):
                    if ch.persistent[c]:
                        lead1.append(((), None))
                        continue
                    lead1.append((selected.get((t, c) + item[:2]), fitted.get((t, c) + item)))
                if any(l is None or (m is None and l) for l, m in lead1):
                    continue
                reg = _regressor(config, run, t, "aggregator")
                jobs.append((_aggregator_task, (scaled[t], price_scaler.transform(estimation), lead1, reg)))
                live.append((t, item))
            for key, (ok, value, s) in zip(live, _run_jobs(jobs, config.jobs)):
                secs[("agg", run) + key] = s
                if ok:
                    aggs[key] = value

        # phase 5: forecasting
        say(f"run {run + 1}/{config.n_seeded_runs}: forecasting")
        jobs, live, deps = [], [], {}
        for sp in report.specs:
            t = sp.technique
            if t is Technique.RANDOM_WALK:
                continue
            reason = broken.get(t)
            model, dep = None, [("dec", t), ("win", t)]
            if reason is None:
                model, dep, reason = _cell_model(config, run, sp, channels[t], selected, fitted, aggs, price_scaler, n_est)
            if model is None:
                report.failures.append((run, sp.horizon, sp.label, reason))
                continue
            origins = _eval_origins(n_est, n_hold, sp.horizon, config.evaluation)
            w = windows[t][:, np.searchsorted(all_origins, origins), :]
            jobs.append((_forecast_task, (model, w, origins, sp.horizon)))
            live.append(sp)
            deps[sp] = dep
        results = dict(zip(live, _run_jobs(jobs, config.jobs)))
        for sp in report.specs:
            if sp.technique is Technique.RANDOM_WALK:
                if sp.horizon not in rw_cache:
                    t0 = time.perf_counter()
                    origins = _eval_origins(n_est, n_hold, sp.horizon, config.evaluation)
                    rw_cache[sp.horizon] = (random_walk_rolling(prices, origins, sp.horizon), time.perf_counter() - t0)
                fset, elapsed = rw_cache[sp.horizon]
            elif sp in results:
                ok, fset, elapsed = results[sp]
                if not ok:
                    report.failures.append((run, sp.horizon, sp.label, fset))
                    continue
                elapsed += sum(secs.get(k, 0.0) for k in deps[sp])
            else:
                continue
            if run == 0:
                report.forecasts[(sp.horizon, sp.label)] = fset
            try:
                metrics, losses = evaluate_forecasts(fset, prices, n_est, sp.horizon, config.evaluation, config.ds_reference)
            except MsfcError as exc:
                report.failures.append((run, sp.horizon, sp.label, f"{type(exc).__name__}: {exc}"))
                continue
            for m, v in metrics.items():
                report.accuracy[(run, m, sp.horizon, sp.label)] = v
            report.timing[(run, sp.horizon, sp.label)] = elapsed
            for k, arr in losses.items():
                run_losses.setdefault((k, sp.horizon), {})[sp.label] = arr

        # SPA over all variants present in this run
        say(f"run {run + 1}/{config.n_seeded_runs}: SPA tests")
        for k in LossKind:
            for h in config.horizons:
                by_label = run_losses.get((k, h), {})
                if len(by_label) < 2:
                    continue
                series_list = [LossSeries(lbl, by_label[lbl]) for lbl in report.labels if lbl in by_label]
                for lbl, res in spa_matrix(series_list, config.spa).items():
                    report.spa[(run, k, h, lbl)] = res
    return report


def _cell_model(config, run, sp: ModelSpec, ch: ChannelSet, selected, fitted, aggs, price_scaler, n_est):
    """Assemble a cell's model from cached artifacts.

    Returns ``(model, dependency keys, failure reason)``.
    """
    t, strat, h = sp.technique, sp.strategy, sp.horizon
    dep = [("dec", t), ("win", t)]
    models = []
    for c in range(len(ch)):
        if ch.persistent[c]:
            models.append(None)
            continue
        fits, lag_sets = [], []
        for sk, sn, fk, fn in _lead_plan(strat, h, config.share_direct_lags):
            key = (t, c, sk, sn, fk, fn)
            if key not in fitted:
                return None, dep, f"component {ch.names[c]}: no model for {fk}{fn}"
            fits.append(fitted[key])
            lag_sets.append(selected[(t, c, sk, sn)])
            dep += [("sel", t, c, sk, sn), ("fit", run) + key]
        models.append(StrategyModel(strat, tuple(fits), tuple(lag_sets), h, _regressor(config, run, t, c)))
    aggregator = None
    if t.uses_emd and config.aggregation_mode is AggregationMode.FNN:
        key = (t, _lead_plan(strat, h, config.share_direct_lags)[0])
        if key not in aggs:
            return None, dep, "aggregator unavailable"
        aggregator = aggs[key]
        dep.append(("agg", run) + key)
    model = EnsembleModel(
        t, strat, h, price_scaler, ch, tuple(models), config.aggregation_mode, aggregator,
        _regressor(config, run, t, "aggregator"), config.sift, config.decomposition_scope, n_est, config.d_max,
    )
    return model, list(dict.fromkeys(dep)), None


def _provenance(config: ExperimentConfig, prices: np.ndarray) -> dict:
    return {
        "data_sha256": hashlib.sha256(np.ascontiguousarray(prices, dtype="<f8").tobytes()).hexdigest(),
        "n_observations": str(len(prices)),
        "run_seeds": ",".join(str(derive_seed(config.base_seed, "run", r)) for r in range(config.n_seeded_runs)),
        "versions": f"msfc {__version__}; python {platform.python_version()}; numpy {np.__version__}; scipy {scipy.__version__}",
    }
