"""Series container, estimation/holdout split, min-max scaling and lag matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import (
    DataError,
    DegenerateScaleError,
    InsufficientDataError,
    InvalidSplitError,
)

__all__ = [
    "D_MAX",
    "LagMatrix",
    "MinMaxScaler",
    "Series",
    "SplitSpec",
    "build_lag_matrix",
    "fit_scaler",
    "normalize_lags",
    "split",
]

#: maximum embedding order used for weekly WTI
D_MAX = 36


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Series:
    """Weekly price series.

    ``timestamps`` is a ``datetime64[D]`` array, ``values`` a float array of the
    same length.  Both are copied and made read-only.
    """

    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype="datetime64[D]")
        vals = np.array(self.values, dtype=float)
        if ts.ndim != 1 or vals.ndim != 1 or ts.shape != vals.shape:
            raise DataError("timestamps and values must be 1-D arrays of equal length")
        if len(vals) < 2:
            raise DataError("a series needs at least 2 observations")
        if not np.all(np.isfinite(vals)):
            raise DataError("series values must be finite")
        if np.any(np.diff(ts) <= np.timedelta64(0, "D")):
            raise DataError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(vals))

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        return np.array_equal(self.timestamps, other.timestamps) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None

    @classmethod
    def from_values(cls, values, start="2000-01-07", step_days=7) -> "Series":
        """Build a weekly-stamped series from bare values (handy for synthetics)."""
        values = np.asarray(values, dtype=float)
        start = np.datetime64(start, "D")
        ts = start + np.arange(len(values)) * np.timedelta64(step_days, "D")
        return cls(ts, values)

    def concat(self, other: "Series") -> "Series":
        return Series(
            np.concatenate([self.timestamps, other.timestamps]),
            np.concatenate([self.values, other.values]),
        )


@dataclass(frozen=True)
class SplitSpec:
    n_estimation: int = 418
    n_holdout: int = 208

    def __post_init__(self):
        if self.n_estimation < 1 or self.n_holdout < 1:
            raise InvalidSplitError("both split parts need at least one observation")

    @property
    def total(self) -> int:
        return self.n_estimation + self.n_holdout


def split(series: Series, spec: SplitSpec) -> tuple[Series, Series]:
    """Split into (estimation, holdout); the holdout follows the estimation sample."""
    if spec.total != len(series):
        raise InvalidSplitError(
            f"split {spec.n_estimation}+{spec.n_holdout}={spec.total} "
            f"does not match series length {len(series)}"
        )
    k = spec.n_estimation
    part = Series if min(spec.n_estimation, spec.n_holdout) >= 2 else _Part
    return (
        part(series.timestamps[:k], series.values[:k]),
        part(series.timestamps[k:], series.values[k:]),
    )


@dataclass(frozen=True, eq=False)
class _Part(Series):
    """Split output allowed to hold a single observation."""

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype="datetime64[D]")
        vals = np.array(self.values, dtype=float)
        object.__setattr__(self, "timestamps", _frozen(ts))
        object.__setattr__(self, "values", _frozen(vals))


@dataclass(frozen=True)
class MinMaxScaler:
    """Linear map of ``[lo, hi]`` onto ``[0, 1]``.

    Values outside the fitted range map outside ``[0, 1]``; this is expected
    for holdout prices above the estimation-sample maximum.
    """

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.hi <= self.lo:
            raise DegenerateScaleError(f"need hi > lo, got lo={self.lo}, hi={self.hi}")

    @property
    def span(self) -> float:
        return self.hi - self.lo

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.lo) / self.span

    def inverse_transform(self, z):
        return np.asarray(z, dtype=float) * self.span + self.lo


def fit_scaler(estimation) -> MinMaxScaler:
    """Fit a min-max scaler on the estimation sample (a Series or array)."""
    values = estimation.values if isinstance(estimation, Series) else np.asarray(estimation, float)
    if values.size < 2:
        raise DegenerateScaleError("need at least 2 values to fit a scaler")
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        raise DegenerateScaleError("estimation sample is constant; cannot scale")
    return MinMaxScaler(lo, hi)


def normalize_lags(lags, d_max: int = D_MAX) -> tuple[int, ...]:
    """Sorted, de-duplicated tuple of positive lags not exceeding ``d_max``."""
    if isinstance(lags, (int, np.integer)):
        lags = range(1, int(lags) + 1)
    out = tuple(sorted({int(l) for l in lags}))
    if not out:
        raise DataError("lag set is empty")
    if out[0] < 1 or out[-1] > d_max:
        raise DataError(f"lags must lie in 1..{d_max}, got {out}")
    return out


@dataclass(frozen=True, eq=False)
class LagMatrix:
    """Supervised rows cut from a series.

    Row ``r`` has forecast origin ``origin_indices[r] = i`` (the index of the
    most recent observed value); lag ``l`` reads ``x[i - l + 1]``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    origin_indices: np.ndarray
    lags: tuple
    horizon: int
    target_mode: str

    def __len__(self) -> int:
        return len(self.origin_indices)


def lag_inputs(values: np.ndarray, lags: Sequence[int], origins: np.ndarray) -> np.ndarray:
    """Input rows for arbitrary origins (no bounds check beyond numpy's)."""
    offsets = 1 - np.asarray(lags, dtype=int)
    return values[np.asarray(origins)[:, None] + offsets[None, :]]


def build_lag_matrix(
    series,
    lags,
    horizon: int = 1,
    target_mode: str = "single",
    d_max: int = D_MAX,
) -> LagMatrix:
    """Build a lag matrix.

    ``target_mode`` is ``"single"`` (next value; ``horizon`` must be 1),
    ``"direct"`` (value ``horizon`` steps ahead) or ``"multi"`` (the
    ``horizon`` next values).
    """
    values = series.values if isinstance(series, Series) else np.asarray(series, dtype=float)
    lags = normalize_lags(lags, d_max)
    if target_mode == "single":
        if horizon != 1:
            raise DataError("single target mode implies horizon 1")
    elif target_mode not in ("direct", "multi"):
        raise DataError(f"unknown target mode {target_mode!r}")
    if horizon < 1:
        raise DataError("horizon must be >= 1")
    max_lag = lags[-1]
    n_rows = len(values) - max_lag - horizon + 1
    if n_rows < 1:
        raise InsufficientDataError(
            f"series of length {len(values)} too short for max lag {max_lag} and horizon {horizon}"
        )
    origins = np.arange(max_lag - 1, max_lag - 1 + n_rows)
    inputs = lag_inputs(values, lags, origins)
    if target_mode == "multi":
        targets = values[origins[:, None] + np.arange(1, horizon + 1)[None, :]]
    else:
        targets = values[origins + horizon][:, None]
    return LagMatrix(
        _frozen(inputs), _frozen(targets), _frozen(origins), lags, horizon, target_mode
    )
