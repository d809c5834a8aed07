"""Single-hidden-layer feed-forward network trained by Levenberg-Marquardt.

Hidden units are logistic, outputs are linear.  Parameters are handled as a
flat vector ordered hidden unit by hidden unit (``w1[j, :]`` then ``b1[j]``)
followed by output unit by output unit (``w2[o, :]`` then ``b2[o]``).
"""

from __future__ import annotations

import io
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg
from scipy.special import expit

from ._seeding import derive_seed
from .exceptions import DataError, DivergenceError, InsufficientDataError, ShapeError

log = logging.getLogger(__name__)

__all__ = [
    "CvPlan",
    "FnnConfig",
    "FnnModel",
    "FnnRegressor",
    "LMTrace",
    "TrainConfig",
    "cross_validate",
    "forward",
    "init_weights",
    "jacobian",
    "lm_fit",
    "load_model",
    "save_model",
    "train_lm",
]

DEFAULT_HIDDEN_GRID = (5, 10, 15, 20)


@dataclass(frozen=True)
class FnnConfig:
    n_inputs: int
    n_hidden: int = 15
    n_outputs: int = 1

    def __post_init__(self):
        if min(self.n_inputs, self.n_hidden, self.n_outputs) < 1:
            raise DataError("network dimensions must be >= 1")

    @property
    def n_params(self) -> int:
        return self.n_hidden * (self.n_inputs + 1) + self.n_outputs * (self.n_hidden + 1)


@dataclass(frozen=True)
class TrainConfig:
    mu_init: float = 1e-3
    mu_increase: float = 10.0
    mu_decrease: float = 0.1
    mu_max: float = 1e10
    max_epochs: int = 200
    sse_tolerance: float = 1e-8
    max_rejections: int = 20
    seed: int = 0
    n_restarts: int = 3

    def __post_init__(self):
        if not self.mu_increase > 1 or not 0 < self.mu_decrease < 1:
            raise DataError("need mu_increase > 1 and 0 < mu_decrease < 1")
        if min(self.max_epochs, self.n_restarts, self.max_rejections) < 1:
            raise DataError("epoch, restart and rejection counts must be >= 1")


@dataclass(frozen=True, eq=False)
class FnnModel:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        w1, b1 = np.array(self.w1, float), np.array(self.b1, float).ravel()
        w2, b2 = np.array(self.w2, float), np.array(self.b2, float).ravel()
        if w1.ndim != 2 or w2.ndim != 2:
            raise ShapeError("weight tables must be 2-D")
        if b1.shape != (w1.shape[0],) or w2.shape[1] != w1.shape[0] or b2.shape != (w2.shape[0],):
            raise ShapeError("inconsistent layer dimensions")
        for a in (w1, b1, w2, b2):
            a.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)

    @property
    def config(self) -> FnnConfig:
        return FnnConfig(self.w1.shape[1], self.w1.shape[0], self.w2.shape[0])

    def params(self) -> np.ndarray:
        hidden = np.hstack([self.w1, self.b1[:, None]])
        out = np.hstack([self.w2, self.b2[:, None]])
        return np.concatenate([hidden.ravel(), out.ravel()])

    @classmethod
    def from_params(cls, theta: np.ndarray, config: FnnConfig) -> "FnnModel":
        i, h, o = config.n_inputs, config.n_hidden, config.n_outputs
        split = h * (i + 1)
        hidden = theta[:split].reshape(h, i + 1)
        out = theta[split:].reshape(o, h + 1)
        return cls(hidden[:, :i], hidden[:, i], out[:, :h], out[:, h])

    def __eq__(self, other):
        if not isinstance(other, FnnModel):
            return NotImplemented
        return all(
            np.array_equal(a, b)
            for a, b in zip((self.w1, self.b1, self.w2, self.b2), (other.w1, other.b1, other.w2, other.b2))
        )

    __hash__ = None


def init_weights(config: FnnConfig, seed: int) -> FnnModel:
    """Uniform fan-in scaled weights, zero biases."""
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / np.sqrt(config.n_inputs)
    lim2 = 1.0 / np.sqrt(config.n_hidden)
    w1 = rng.uniform(-lim1, lim1, size=(config.n_hidden, config.n_inputs))
    w2 = rng.uniform(-lim2, lim2, size=(config.n_outputs, config.n_hidden))
    return FnnModel(w1, np.zeros(config.n_hidden), w2, np.zeros(config.n_outputs))


def _as_batch(model: FnnModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.w1.shape[1]:
        raise ShapeError(f"expected inputs of width {model.w1.shape[1]}, got shape {x.shape}")
    return x, single


def forward(model: FnnModel, x) -> np.ndarray:
    """Network output for one input vector or a batch of rows."""
    xb, single = _as_batch(model, x)
    z = expit(xb @ model.w1.T + model.b1)
    out = z @ model.w2.T + model.b2
    return out[0] if single else out


def jacobian(model: FnnModel, batch) -> np.ndarray:
    """Jacobian of the output errors with respect to every parameter.

    Errors are ``output - target``, so the Jacobian equals the derivative of
    the outputs.  Rows are sample-major (``s * n_outputs + o``), columns follow
    the flat parameter order of :meth:`FnnModel.params`.
    """
    xb, _ = _as_batch(model, batch)
    s_count = len(xb)
    h, o = model.w1.shape[0], model.w2.shape[0]
    xa = np.hstack([xb, np.ones((s_count, 1))])
    z = expit(xb @ model.w1.T + model.b1)
    za = np.hstack([z, np.ones((s_count, 1))])
    dz = z * (1.0 - z)
    # d out_o / d W1a[j, i] = w2[o, j] * dz[s, j] * xa[s, i]
    hid = model.w2[None, :, :, None] * dz[:, None, :, None] * xa[:, None, None, :]
    hid = hid.reshape(s_count, o, -1)
    out = np.zeros((s_count, o, o, h + 1))
    idx = np.arange(o)
    out[:, idx, idx, :] = za[:, None, :]
    out = out.reshape(s_count, o, -1)
    return np.concatenate([hid, out], axis=2).reshape(s_count * o, -1)


def _normal_equations(model: FnnModel, xa: np.ndarray, err: np.ndarray, z: np.ndarray):
    """``J^T J`` and ``J^T e`` assembled blockwise without forming ``J``."""
    s_count = len(xa)
    h, o = model.w2.shape[1], model.w2.shape[0]
    ni = xa.shape[1]
    za = np.hstack([z, np.ones((s_count, 1))])
    dz = z * (1.0 - z)
    q = (dz[:, :, None] * xa[:, None, :]).reshape(s_count, h * ni)
    w2 = model.w2
    m = w2.T @ w2
    a_hh = (q.T @ q) * np.kron(m, np.ones((ni, ni)))
    r = q.T @ za
    w2e = np.repeat(w2.T, ni, axis=0)
    a_ho = (r[:, None, :] * w2e[:, :, None]).reshape(h * ni, o * (h + 1))
    a_oo = np.kron(np.eye(o), za.T @ za)
    a = np.block([[a_hh, a_ho], [a_ho.T, a_oo]])
    g_h = (((err @ w2) * dz).T @ xa).ravel()
    g_o = (err.T @ za).ravel()
    return a, np.concatenate([g_h, g_o])


class LMTrace(NamedTuple):
    model: FnnModel
    sse: float
    sse_history: list
    epochs: int
    stop_reason: str


def _sse_of(model, xb, yb):
    z = expit(xb @ model.w1.T + model.b1)
    err = z @ model.w2.T + model.b2 - yb
    return float(np.sum(err * err)), err, z


def lm_fit(inputs, targets, model: FnnModel, tc: TrainConfig = TrainConfig()) -> LMTrace:
    """Levenberg-Marquardt from a given starting model.

    Each epoch solves ``(J^T J + mu I) delta = -J^T e``; a step that lowers the
    SSE is accepted and ``mu`` shrinks, otherwise ``mu`` grows and the step is
    retried (at most ``tc.max_rejections`` times per epoch).
    """
    xb = np.asarray(inputs, dtype=float)
    yb = np.asarray(targets, dtype=float)
    if yb.ndim == 1:
        yb = yb[:, None]
    config = model.config
    xa = np.hstack([xb, np.ones((len(xb), 1))])
    theta = model.params()
    sse, err, z = _sse_of(model, xb, yb)
    if not np.isfinite(sse):
        raise DivergenceError("non-finite SSE at start")
    history = [sse]
    mu = tc.mu_init
    reason = "max_epochs"
    epochs = 0
    while epochs < tc.max_epochs:
        if sse <= tc.sse_tolerance:
            reason = "sse_tolerance"
            break
        epochs += 1
        a, g = _normal_equations(model, xa, err, z)
        diag = np.arange(len(theta))
        accepted = False
        for _ in range(tc.max_rejections):
            a_mu = a.copy()
            a_mu[diag, diag] += mu
            try:
                step = -linalg.cho_solve(linalg.cho_factor(a_mu, check_finite=False), g)
            except linalg.LinAlgError:
                mu *= tc.mu_increase
                continue
            candidate = FnnModel.from_params(theta + step, config)
            new_sse, new_err, new_z = _sse_of(candidate, xb, yb)
            if np.isfinite(new_sse) and new_sse < sse:
                theta, model, sse, err, z = theta + step, candidate, new_sse, new_err, new_z
                history.append(sse)
                mu *= tc.mu_decrease
                accepted = True
                break
            mu *= tc.mu_increase
            if mu > tc.mu_max:
                break
        if mu > tc.mu_max:
            reason = "mu_max"
            break
        if not accepted:
            reason = "no_improvement"
            break
    if not np.isfinite(sse):
        raise DivergenceError("SSE became non-finite")
    return LMTrace(model, sse, history, epochs, reason)


def train_lm(inputs, targets, config: FnnConfig, tc: TrainConfig = TrainConfig()):
    """Train ``tc.n_restarts`` networks from seeded starts; keep the lowest SSE.

    Returns ``(model, final_sse)``.
    """
    xb = np.asarray(inputs, dtype=float)
    yb = np.asarray(targets, dtype=float)
    if yb.ndim == 1:
        yb = yb[:, None]
    if len(xb) != len(yb):
        raise ShapeError("inputs and targets differ in row count")
    if len(xb) < 2:
        raise InsufficientDataError("need at least 2 training rows")
    if xb.shape[1] != config.n_inputs or yb.shape[1] != config.n_outputs:
        raise ShapeError("data width does not match network configuration")
    if len(xb) * 10 < config.n_params:
        warnings.warn(
            f"{len(xb)} rows for {config.n_params} parameters; fit is poorly determined",
            stacklevel=2,
        )
    best = None
    for r in range(tc.n_restarts):
        start = init_weights(config, derive_seed(tc.seed, "restart", r))
        try:
            trace = lm_fit(xb, yb, start, tc)
        except DivergenceError as exc:
            log.debug("restart %d diverged: %s", r, exc)
            continue
        if best is None or trace.sse < best.sse:
            best = trace
    if best is None:
        raise DivergenceError("every restart diverged")
    return best.model, best.sse


@dataclass(frozen=True)
class CvPlan:
    k: int = 5

    def folds(self, n_rows: int) -> list[np.ndarray]:
        """Blocked contiguous folds whose sizes differ by at most one."""
        if n_rows < self.k:
            raise InsufficientDataError(f"{n_rows} rows cannot form {self.k} folds")
        return np.array_split(np.arange(n_rows), self.k)


def cross_validate(
    inputs,
    targets,
    config_grid: Sequence[FnnConfig],
    tc: TrainConfig = TrainConfig(),
    plan: CvPlan = CvPlan(),
) -> FnnConfig:
    """Pick the configuration with the lowest mean validation SSE.

    Ties go to fewer hidden units, then to the earlier grid entry.
    """
    grid = list(config_grid)
    if not grid:
        raise DataError("empty configuration grid")
    if len(grid) == 1:
        return grid[0]
    xb = np.asarray(inputs, dtype=float)
    yb = np.asarray(targets, dtype=float)
    if yb.ndim == 1:
        yb = yb[:, None]
    folds = plan.folds(len(xb))
    scores = []
    for gi, config in enumerate(grid):
        fold_sse = []
        for fi, val in enumerate(folds):
            train = np.setdiff1d(np.arange(len(xb)), val, assume_unique=True)
            ftc = replace(tc, seed=derive_seed(tc.seed, "cv", config.n_hidden, fi))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model, _ = train_lm(xb[train], yb[train], config, ftc)
            resid = forward(model, xb[val]) - yb[val]
            fold_sse.append(float(np.sum(resid * resid)))
        scores.append((float(np.mean(fold_sse)), config.n_hidden, gi))
    return grid[min(scores)[2]]


@dataclass(frozen=True)
class FnnRegressor:
    """Regressor adapter used by the forecasting strategies.

    ``fit`` derives its training seed from ``train.seed`` and the task key,
    so identical keys on identical data give identical networks.
    """

    n_hidden: int = 15
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden_grid: tuple = ()
    supports_multi_output = True

    def fit(self, inputs, targets, key="model") -> FnnModel:
        xb = np.asarray(inputs, dtype=float)
        yb = np.asarray(targets, dtype=float)
        if yb.ndim == 1:
            yb = yb[:, None]
        tc = replace(self.train, seed=derive_seed(self.train.seed, key))
        config = FnnConfig(xb.shape[1], self.n_hidden, yb.shape[1])
        if len(self.hidden_grid) > 1:
            grid = [FnnConfig(xb.shape[1], h, yb.shape[1]) for h in self.hidden_grid]
            config = cross_validate(xb, yb, grid, tc)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model, _ = train_lm(xb, yb, config, tc)
        return model

    def predict(self, model: FnnModel, inputs) -> np.ndarray:
        out = forward(model, np.atleast_2d(np.asarray(inputs, dtype=float)))
        return out


def _fmt(a) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(a))


def save_model(model: FnnModel, path) -> None:
    """Write the flat text format: a dimension header then one line per array."""
    c = model.config
    text = "\n".join(
        [
            f"fnn {c.n_inputs} {c.n_hidden} {c.n_outputs}",
            _fmt(model.w1),
            _fmt(model.b1),
            _fmt(model.w2),
            _fmt(model.b2),
        ]
    )
    Path(path).write_text(text + "\n")


def load_model(path) -> FnnModel:
    lines = Path(path).read_text().splitlines()
    tag, *dims = lines[0].split()
    if tag != "fnn" or len(dims) != 3:
        raise DataError(f"{path}: not a model file")
    n_in, n_hid, n_out = map(int, dims)
    arrays = [np.loadtxt(io.StringIO(line), ndmin=1) for line in lines[1:5]]
    return FnnModel(
        arrays[0].reshape(n_hid, n_in),
        arrays[1],
        arrays[2].reshape(n_out, n_hid),
        arrays[3],
    )
