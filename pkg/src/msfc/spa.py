"""Hansen's test for superior predictive ability with the stationary bootstrap."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .exceptions import DataError
from .metrics import EvaluationFrame, ds_hits, mase_scale, smape_terms

__all__ = [
    "LossKind",
    "LossSeries",
    "RelativePerformance",
    "SpaConfig",
    "SpaResult",
    "per_observation_losses",
    "spa_matrix",
    "spa_test",
    "stationary_bootstrap_indices",
]


class LossKind(str, Enum):
    SMAPE = "smape"
    MASE = "mase"
    DS = "ds"


@dataclass(frozen=True, eq=False)
class LossSeries:
    model_id: str
    losses: np.ndarray

    def __post_init__(self):
        a = np.array(self.losses, dtype=float).ravel()
        if not np.all(np.isfinite(a)):
            raise DataError(f"losses of {self.model_id} contain non-finite values")
        a.setflags(write=False)
        object.__setattr__(self, "losses", a)

    def __len__(self):
        return len(self.losses)


@dataclass(frozen=True)
class SpaConfig:
    n_bootstrap: int = 10_000
    mean_block_length: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.n_bootstrap < 100:
            raise DataError("n_bootstrap must be >= 100")
        if self.mean_block_length < 1:
            raise DataError("mean block length must be >= 1")


@dataclass(frozen=True, eq=False)
class RelativePerformance:
    """``f[k, t] = L_base[t] - L_k[t]``; positive entries favour competitor k."""

    f: np.ndarray

    @property
    def means(self) -> np.ndarray:
        return self.f.mean(axis=1)


@dataclass(frozen=True)
class SpaResult:
    statistic: float
    p_value: float
    p_lower: float
    p_upper: float
    per_model_means: tuple


def per_observation_losses(frame: EvaluationFrame, loss_kind, model_id: str = "model") -> LossSeries:
    """Loss per holdout observation; smaller is better for every kind.

    The DS loss is the direction miss indicator ``1 - d_t``.
    """
    kind = LossKind(loss_kind)
    if kind is LossKind.SMAPE:
        losses = smape_terms(frame.actual, frame.predicted)
    elif kind is LossKind.MASE:
        losses = np.abs(frame.actual - frame.predicted) / mase_scale(frame.estimation)
    else:
        losses = 1.0 - ds_hits(frame.actual, frame.predicted, frame.prev_actual)
    return LossSeries(model_id, losses)


def _one_replicate(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    new_block = rng.random(n) < p
    new_block[0] = True
    starts = rng.integers(0, n, size=n)
    block_id = np.cumsum(new_block) - 1
    first_pos = np.flatnonzero(new_block)
    offset = np.arange(n) - first_pos[block_id]
    return (starts[first_pos][block_id] + offset) % n


def stationary_bootstrap_indices(n: int, q: float, seed: int, replicate: int = 0) -> np.ndarray:
    """One stationary-bootstrap index sequence of length ``n``.

    Blocks start at uniform positions, wrap circularly, and have geometric
    lengths with mean ``q``.  Replicate ``r`` of seed ``s`` always draws from
    the same stream, whatever order replicates are generated in.
    """
    if n < 1 or not 1 <= q <= max(n, 1):
        raise DataError("need n >= 1 and 1 <= q <= n")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return _one_replicate(np.random.default_rng(ss), n, 1.0 / q)


@lru_cache(maxsize=16)
def _count_matrix(n: int, q: float, seed: int, n_bootstrap: int) -> np.ndarray:
    """How often each observation appears in each replicate, shape ``(B, n)``."""
    out = np.empty((n_bootstrap, n))
    for b in range(n_bootstrap):
        out[b] = np.bincount(stationary_bootstrap_indices(n, q, seed, b), minlength=n)
    out.setflags(write=False)
    return out


def _p_value(boot_means, g, omega, sqrt_n, stat):
    z = sqrt_n * (boot_means - g[None, :])
    # a zero-scale differential is constant, so its recentred draws are 0
    safe = np.where(omega > 0, omega, 1.0)
    ratios = np.where(omega[None, :] > 0, z / safe[None, :], 0.0)
    t_star = np.maximum(ratios.max(axis=1), 0.0)
    return float(np.mean(t_star >= stat))


def spa_test(base: LossSeries, competitors: Sequence[LossSeries], config: SpaConfig = SpaConfig()) -> SpaResult:
    """SPA test of ``base`` against ``competitors``.

    The null is that no competitor has lower expected loss than the base.
    ``p_value`` uses the consistent recentering; ``p_lower`` and ``p_upper``
    the lower (``max(f_k, 0)``) and upper (no recentering) variants.
    """
    if not competitors:
        raise DataError("SPA test needs at least one competitor")
    n = len(base)
    if any(len(c) != n for c in competitors):
        raise DataError("loss series are not aligned")
    f = np.vstack([base.losses - c.losses for c in competitors])
    means = f.mean(axis=1)
    if not np.any(f):
        return SpaResult(0.0, 1.0, 1.0, 1.0, tuple(means))
    counts = _count_matrix(n, float(config.mean_block_length), int(config.seed), int(config.n_bootstrap))
    boot = counts @ f.T / n  # (B, l) resampled means
    sqrt_n = np.sqrt(n)
    omega = np.sqrt(n * np.mean((boot - means[None, :]) ** 2, axis=0))
    # constant-zero differentials carry no information
    active = ~((omega == 0) & (means == 0))
    if not active.any():
        return SpaResult(0.0, 1.0, 1.0, 1.0, tuple(means))
    m_a, o_a, b_a = means[active], omega[active], boot[:, active]
    safe = np.where(o_a > 0, o_a, 1.0)
    t_k = np.where(o_a > 0, sqrt_n * m_a / safe, np.where(m_a > 0, np.inf, -np.inf))
    stat = float(max(t_k.max(), 0.0))
    log_term = np.sqrt(2.0 * np.log(np.log(n)) / n) if n > 2 else 0.0
    g_c = np.where(m_a >= -o_a * log_term, m_a, 0.0)
    g_l = np.maximum(m_a, 0.0)
    return SpaResult(
        statistic=stat,
        p_value=_p_value(b_a, g_c, o_a, sqrt_n, stat),
        p_lower=_p_value(b_a, g_l, o_a, sqrt_n, stat),
        p_upper=_p_value(b_a, m_a, o_a, sqrt_n, stat),
        per_model_means=tuple(means),
    )


def spa_matrix(models: Mapping[str, LossSeries] | Sequence[LossSeries], config: SpaConfig = SpaConfig()) -> dict:
    """SPA result for each model taken as the base against all the others."""
    if isinstance(models, Mapping):
        items = list(models.items())
    else:
        items = [(m.model_id, m) for m in models]
    if len(items) < 2:
        raise DataError("SPA matrix needs at least two models")
    out = {}
    for name, series in items:
        rivals = [s for other, s in items if other != name]
        out[name] = spa_test(series, rivals, config)
    return out
