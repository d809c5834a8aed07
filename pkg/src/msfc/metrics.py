"""SMAPE, MASE and directional symmetry on the original price scale."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, UndefinedMetricError

__all__ = [
    "EvaluationFrame",
    "ds",
    "ds_hits",
    "mase",
    "mase_scale",
    "smape",
    "smape_terms",
]


@dataclass(frozen=True, eq=False)
class EvaluationFrame:
    """Aligned holdout targets and forecasts.

    ``prev_actual[t]`` is the observed value one step before target ``t``;
    ``estimation`` is the in-sample series used to scale MASE.
    """

    actual: np.ndarray
    predicted: np.ndarray
    prev_actual: np.ndarray
    estimation: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("actual", "predicted", "prev_actual", "estimation"):
            a = np.array(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(a)):
                raise DataError(f"{name} contains non-finite values")
            a.setflags(write=False)
            arrays[name] = a
            object.__setattr__(self, name, a)
        m = len(arrays["actual"])
        if m == 0 or len(arrays["predicted"]) != m or len(arrays["prev_actual"]) != m:
            raise DataError("actual, predicted and prev_actual must share a non-zero length")

    def __len__(self):
        return len(self.actual)


def smape_terms(actual, predicted, conventional: bool = False) -> np.ndarray:
    """Per-observation SMAPE terms in percent.

    By default ``|a - p| / (a + p) * 100``; ``conventional=True`` uses
    ``2|a - p| / (|a| + |p|) * 100`` instead.
    """
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    denom = np.abs(a) + np.abs(p) if conventional else a + p
    if np.any(denom == 0):
        raise UndefinedMetricError("SMAPE undefined where actual + predicted == 0")
    terms = np.abs((a - p) / denom) * 100.0
    return 2.0 * terms if conventional else terms


def smape(frame: EvaluationFrame, conventional: bool = False) -> float:
    return float(np.mean(smape_terms(frame.actual, frame.predicted, conventional)))


def mase_scale(estimation) -> float:
    """In-sample mean absolute one-step change."""
    e = np.asarray(estimation, dtype=float)
    if len(e) < 2:
        raise UndefinedMetricError("MASE scale needs at least 2 estimation values")
    scale = float(np.mean(np.abs(np.diff(e))))
    if scale == 0:
        raise UndefinedMetricError("constant estimation sample gives a zero MASE scale")
    return scale


def mase(frame: EvaluationFrame) -> float:
    return float(np.mean(np.abs(frame.actual - frame.predicted)) / mase_scale(frame.estimation))


def ds_hits(actual, predicted, prev_actual) -> np.ndarray:
    """1 where the forecast direction (from the previous actual) matches the
    realised one; a zero product counts as a hit."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    prev = np.asarray(prev_actual, dtype=float)
    return ((a - prev) * (p - prev) >= 0).astype(float)


def ds(frame: EvaluationFrame) -> float:
    return float(np.mean(ds_hits(frame.actual, frame.predicted, frame.prev_actual)))
