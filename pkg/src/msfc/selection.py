"""Lag selection: partial mutual information, the Delta test, and a
forward-backward search over candidate lags 1..d_max.

PMI serves single-output models (iterated and direct strategies); the Delta
test handles vector targets and therefore the MIMO strategy.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from ._seeding import derive_rng
from .exceptions import DataError, DegenerateInputError
from .series import D_MAX, build_lag_matrix

log = logging.getLogger(__name__)

__all__ = [
    "Criterion",
    "SelectionCriterion",
    "SelectionResult",
    "delta_test",
    "forward_backward_search",
    "mutual_information",
    "pmi_score",
    "select_lags",
]


class Criterion(str, Enum):
    PMI = "pmi"
    DELTA = "delta"


@dataclass(frozen=True)
class SelectionCriterion:
    kind: Criterion = Criterion.PMI
    n_surrogates: int = 100
    surrogate_quantile: float = 0.95
    n_neighbors: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", Criterion(self.kind))
        if self.n_surrogates < 1 or self.n_neighbors < 1:
            raise DataError("surrogate and neighbour counts must be >= 1")


class SelectionResult(NamedTuple):
    lags: tuple
    n_iterations: int
    fell_back: bool


def _bandwidth(x: np.ndarray) -> np.ndarray:
    """Gaussian reference bandwidth ``1.06 sigma n^(-1/5)`` per column."""
    n = x.shape[0]
    return 1.06 * x.std(axis=0, ddof=1) * n ** (-0.2)


def _gauss_kernel(x: np.ndarray) -> np.ndarray:
    """Unnormalised product Gaussian kernel matrix for the rows of ``x``."""
    x = np.atleast_2d(x.T).T
    h = _bandwidth(x)
    if np.any(h <= 0):
        raise DegenerateInputError("zero-variance column")
    d2 = cdist(x / h, x / h, "sqeuclidean")
    return np.exp(-0.5 * d2)


def _check_columns(*cols):
    for c in cols:
        c = np.asarray(c, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if np.any(c.std(axis=0) == 0):
            raise DegenerateInputError("zero-variance column")


def _mi_from_kernels(ku: np.ndarray, kv: np.ndarray) -> float:
    n = ku.shape[0]
    joint = np.einsum("ij,ij->i", ku, kv)
    return float(np.mean(np.log(n * joint / (ku.sum(axis=1) * kv.sum(axis=1)))))


def mutual_information(u, v) -> float:
    """Kernel density estimate of I(u; v) in nats (may dip slightly below 0)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_columns(u, v)
    return _mi_from_kernels(_gauss_kernel(u), _gauss_kernel(v))


def _residual_operator(selected) -> np.ndarray | None:
    """Nadaraya-Watson smoother matrix for E[. | selected]."""
    if selected is None:
        return None
    s = np.asarray(selected, dtype=float)
    if s.size == 0:
        return None
    if s.ndim == 1:
        s = s[:, None]
    _check_columns(s)
    k = _gauss_kernel(s)
    return k / k.sum(axis=1, keepdims=True)


def _residual(w, x):
    return x if w is None else x - w @ x


def pmi_score(candidate, selected, target) -> float:
    """Partial mutual information of ``candidate`` and ``target`` given ``selected``.

    Both variables are replaced by their residuals after Gaussian-kernel
    regression on the already selected columns; with nothing selected this
    is plain mutual information.
    """
    c = np.asarray(candidate, dtype=float).ravel()
    y = np.asarray(target, dtype=float).ravel()
    if len(c) != len(y):
        raise DataError("candidate and target lengths differ")
    if len(c) < 30:
        raise DataError("PMI needs at least 30 samples")
    if len(c) < 100:
        warnings.warn("PMI estimate from fewer than 100 samples is noisy", stacklevel=2)
    _check_columns(c, y)
    w = _residual_operator(selected)
    return mutual_information(_residual(w, c), _residual(w, y))


def delta_test(inputs, targets, n_neighbors: int = 1) -> float:
    """Delta-test noise-variance estimate for (possibly vector) targets.

    ``0.5 * mean_i |y_nn(i) - y_i|^2`` with nearest neighbours taken in the
    min-max scaled input space and ties resolved to the lowest index.  With
    ``n_neighbors > 1`` the squared differences are averaged over neighbours.
    """
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if y.ndim == 1:
        y = y[:, None]
    n = len(x)
    if n < 2 or x.shape[1] < 1 or len(y) != n:
        raise DataError("delta test needs >= 2 aligned samples and >= 1 input column")
    span = x.max(axis=0) - x.min(axis=0)
    span[span == 0] = 1.0
    xs = (x - x.min(axis=0)) / span
    d = cdist(xs, xs, "sqeuclidean")
    np.fill_diagonal(d, np.inf)
    k = min(n_neighbors, n - 1)
    if k == 1:
        nn = np.argmin(d, axis=1)[:, None]
    else:
        nn = np.argsort(d, axis=1, kind="stable")[:, :k]
    diff = y[nn] - y[:, None, :]
    return float(0.5 * np.mean(np.sum(diff * diff, axis=2)))


def _delta_empty(y: np.ndarray) -> float:
    # expected half squared distance between two distinct random rows
    return float(np.sum(y.var(axis=0, ddof=1)))


class _PmiState:
    def __init__(self, cands, y, criterion, rng):
        self.cands = cands
        self.y = y
        self.criterion = criterion
        # one fixed surrogate set: re-testing the same lag against the same
        # conditioning set must give the same verdict
        n = len(y)
        perms = [rng.permutation(n) for _ in range(criterion.n_surrogates)]
        # flat gather indices of the doubly permuted target kernel
        self.flat = [(p[:, None] * n + p[None, :]).ravel() for p in perms]
        self.verdicts: dict = {}

    def scores(self, selected: list[int], pool: list[int]):
        w = _residual_operator(self.cands[:, selected]) if selected else None
        v = _residual(w, self.y)
        kv = _gauss_kernel(v)
        out = {}
        for j in pool:
            u = _residual(w, self.cands[:, j])
            ku = _gauss_kernel(u)
            out[j] = (_mi_from_kernels(ku, kv), ku)
        return out, kv

    def threshold(self, ku, kv) -> float:
        n = len(kv)
        flat_kv = kv.ravel()
        sur = np.empty(len(self.flat))
        for b, idx in enumerate(self.flat):
            sur[b] = _mi_from_kernels(ku, np.take(flat_kv, idx).reshape(n, n))
        return float(np.quantile(sur, self.criterion.surrogate_quantile))

    def significant(self, j: int, given: list[int]) -> bool:
        """Does lag column ``j`` beat the surrogate bar given ``given``?"""
        key = (frozenset(given), j)
        if key not in self.verdicts:
            sc, kv = self.scores(given, [j])
            self.verdicts[key] = sc[j][0] > self.threshold(sc[j][1], kv)
        return self.verdicts[key]


def forward_backward_search(
    candidates,
    targets,
    criterion: SelectionCriterion = SelectionCriterion(),
    seed: int = 0,
    max_iterations: int | None = None,
) -> SelectionResult:
    """Forward-backward selection over the columns of ``candidates``.

    Column ``j`` stands for lag ``j + 1``.  Forward steps add the best
    candidate; backward steps drop selected columns that no longer earn
    their place.  For PMI a candidate is added only while its score beats
    the chosen quantile of target-shuffled surrogate scores, and a selected
    lag is dropped when its PMI given the others falls below that bar.  For
    the Delta test every accepted move must strictly lower the estimate.
    The loop stops when a full forward+backward pass changes nothing or
    after ``4 * d_max`` iterations.
    """
    x = np.asarray(candidates, dtype=float)
    y = np.asarray(targets, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    d_max = x.shape[1]
    cap = max_iterations or 4 * d_max
    selected: list[int] = []
    it = 0
    if criterion.kind is Criterion.PMI:
        if y.shape[1] != 1:
            raise DataError("PMI selection needs a single target column")
        state = _PmiState(x, y[:, 0], criterion, derive_rng(seed, "pmi"))
        seen = {frozenset()}
        changed = True
        while changed and it < cap:
            changed = False
            pool = [j for j in range(d_max) if j not in selected]
            if pool:
                it += 1
                scores, kv = state.scores(selected, pool)
                best = max(pool, key=lambda j: (scores[j][0], -j))
                key = (frozenset(selected), best)
                if key not in state.verdicts:
                    state.verdicts[key] = scores[best][0] > state.threshold(scores[best][1], kv)
                if state.verdicts[key]:
                    selected.append(best)
                    changed = True
            while len(selected) > 1 and it < cap:
                it += 1
                dropped = False
                for j in list(selected):
                    if not state.significant(j, [s for s in selected if s != j]):
                        selected.remove(j)
                        dropped = changed = True
                        break
                if not dropped:
                    break
            # a revisited set means add and drop verdicts alternate: stop there
            key = frozenset(selected)
            if changed and key in seen:
                log.debug("PMI search revisited %s; stopping", sorted(j + 1 for j in key))
                break
            seen.add(key)
    elif criterion.kind is Criterion.DELTA:
        k = criterion.n_neighbors
        current = _delta_empty(y)
        changed = True
        while changed and it < cap:
            changed = False
            pool = [j for j in range(d_max) if j not in selected]
            if pool:
                it += 1
                trial = {j: delta_test(x[:, selected + [j]], y, k) for j in pool}
                best = min(pool, key=lambda j: (trial[j], j))
                if trial[best] < current:
                    selected.append(best)
                    current = trial[best]
                    changed = True
            while len(selected) > 1 and it < cap:
                it += 1
                trial = {j: delta_test(x[:, [s for s in selected if s != j]], y, k) for j in selected}
                best = min(selected, key=lambda j: (trial[j], j))
                if trial[best] < current:
                    selected.remove(best)
                    current = trial[best]
                    changed = True
                else:
                    break
    else:  # pragma: no cover
        raise DataError(f"unknown criterion {criterion.kind}")
    if not selected:
        warnings.warn("no lag selected; falling back to lag 1", stacklevel=2)
        return SelectionResult((1,), it, True)
    return SelectionResult(tuple(sorted(j + 1 for j in selected)), it, False)


def select_lags(
    values,
    lead: int = 1,
    horizon: int = 1,
    criterion: SelectionCriterion = SelectionCriterion(),
    d_max: int = D_MAX,
    seed: int = 0,
) -> SelectionResult:
    """Select lags of ``values`` for a lead-``lead`` target (PMI) or for the
    vector of the next ``horizon`` values (Delta test)."""
    values = np.asarray(values, dtype=float)
    if criterion.kind is Criterion.DELTA:
        lm = build_lag_matrix(values, range(1, d_max + 1), horizon, "multi", d_max=d_max)
    else:
        mode = "single" if lead == 1 else "direct"
        lm = build_lag_matrix(values, range(1, d_max + 1), lead, mode, d_max=d_max)
    # columns in lag order 1..d_max
    return forward_backward_search(lm.inputs, lm.targets, criterion, seed=seed)
