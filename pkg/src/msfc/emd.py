"""Empirical mode decomposition with selectable boundary treatment.

Sifting builds upper and lower cubic-spline envelopes through the local
extrema and subtracts their mean until the Huang standard-deviation
criterion is met.  Three boundary treatments are available:

``sbm``
    slope-based extension: one synthetic maximum and minimum beyond each end,
    extrapolated along the line through the two outermost same-kind extrema.
``mirror``
    the two outermost extrema of each kind are reflected about the endpoint.
``truncate``
    no extension; the envelopes stop at the outermost extrema and are held
    flat from there to the ends, which leaves the end effect untreated.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import (
    CorruptDecompositionError,
    DataError,
    InsufficientKnotsError,
    NotSiftableError,
)

__all__ = [
    "BoundaryMode",
    "Decomposition",
    "Extrema",
    "SiftConfig",
    "decompose",
    "extend_extrema",
    "extend_extrema_mirror",
    "extend_extrema_sbm",
    "find_extrema",
    "reconstruct",
    "sift",
    "spline_envelope",
]


class BoundaryMode(str, Enum):
    SBM = "sbm"
    MIRROR = "mirror"
    TRUNCATE = "truncate"


class Extrema(NamedTuple):
    """Extremum positions and levels, sorted by index.

    Indices are integers; boundary-extended entries may be negative or
    ``>= len(signal)``.
    """

    index: np.ndarray
    value: np.ndarray

    def __len__(self):
        return len(self.index)


@dataclass(frozen=True)
class SiftConfig:
    sd_threshold: float = 0.3
    max_sift_iterations: int = 10
    max_imfs: int = 12
    boundary_mode: BoundaryMode = BoundaryMode.SBM

    def __post_init__(self):
        object.__setattr__(self, "boundary_mode", BoundaryMode(self.boundary_mode))
        if not self.sd_threshold > 0:
            raise DataError("sd_threshold must be positive")
        if self.max_sift_iterations < 1 or self.max_imfs < 1:
            raise DataError("iteration and IMF caps must be >= 1")


@dataclass(frozen=True, eq=False)
class Decomposition:
    imfs: tuple
    residue: np.ndarray

    def __len__(self):
        return len(self.imfs)

    @property
    def components(self) -> np.ndarray:
        """IMFs followed by the residue, shape ``(n_imfs + 1, n)``."""
        return np.vstack(list(self.imfs) + [self.residue])


def _empty():
    return Extrema(np.empty(0, dtype=np.int64), np.empty(0))


def find_extrema(signal) -> tuple[Extrema, Extrema]:
    """Interior local maxima and minima of ``signal``.

    A run of equal samples flanked on both sides by strictly lower (higher)
    neighbours counts as a single maximum (minimum) at the run centre,
    taking the left-centre sample for even-length runs.  Runs touching
    either end are never extrema.
    """
    x = np.asarray(signal, dtype=float)
    n = len(x)
    if n < 3:
        return _empty(), _empty()
    # collapse runs of equal values
    change = np.flatnonzero(np.diff(x) != 0)
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change, [n - 1]))
    vals = x[starts]
    if len(vals) < 3:
        return _empty(), _empty()
    left = vals[1:-1] - vals[:-2]
    right = vals[1:-1] - vals[2:]
    centre = (starts[1:-1] + ends[1:-1]) // 2
    is_max = (left > 0) & (right > 0)
    is_min = (left < 0) & (right < 0)
    maxima = Extrema(centre[is_max].astype(np.int64), vals[1:-1][is_max])
    minima = Extrema(centre[is_min].astype(np.int64), vals[1:-1][is_min])
    return maxima, minima


def _insert(ext: Extrema, index, value) -> Extrema:
    idx = np.append(ext.index, np.int64(index))
    val = np.append(ext.value, float(value))
    order = np.argsort(idx, kind="stable")
    idx, val = idx[order], val[order]
    keep = np.concatenate(([True], np.diff(idx) != 0))
    return Extrema(idx[keep], val[keep])


def _endpoint_fallback(maxima, minima, x):
    n = len(x)
    for i in (0, n - 1):
        maxima = _insert(maxima, i, x[i])
        minima = _insert(minima, i, x[i])
    return maxima, minima


def _slope_extend(ext: Extrema, n: int) -> Extrema:
    # step along the line through the two outermost extrema, one spacing at a
    # time, until the synthetic knot clears the boundary
    i1, i2 = int(ext.index[0]), int(ext.index[1])
    v1, v2 = ext.value[0], ext.value[1]
    k = i1 // (i2 - i1) + 1
    left_i, left_v = i1 - k * (i2 - i1), v1 - k * (v2 - v1)
    j1, j2 = int(ext.index[-1]), int(ext.index[-2])
    w1, w2 = ext.value[-1], ext.value[-2]
    k = (n - 1 - j1) // (j1 - j2) + 1
    right_i, right_v = j1 + k * (j1 - j2), w1 + k * (w1 - w2)
    idx = np.concatenate(([left_i], ext.index, [right_i]))
    val = np.concatenate(([left_v], ext.value, [right_v]))
    return Extrema(idx.astype(np.int64), val)


def _line_at(i_a, v_a, i_b, v_b, at):
    return v_a + (v_b - v_a) * (at - i_a) / (i_b - i_a)


def extend_extrema_sbm(maxima: Extrema, minima: Extrema, signal):
    """Slope-based boundary extension.

    Returns ``(maxima, minima, fell_back)``.  At the left end the synthetic
    maximum sits at ``i1 - (i2 - i1)`` with level ``2*v1 - v2`` where
    ``(i1, v1), (i2, v2)`` are the first two maxima, stepping further along
    the same line when that index is still inside the signal; minima and the
    right end are handled the same way.  If an endpoint then lies above the implied
    upper envelope line (or below the lower one) the endpoint itself is added
    as an extremum of that kind.  With fewer than two maxima or minima the
    endpoints are used as both boundary maxima and minima and ``fell_back``
    is True.
    """
    x = np.asarray(signal, dtype=float)
    n = len(x)
    if n < 4:
        raise DataError("slope-based extension needs at least 4 samples")
    if len(maxima) < 2 or len(minima) < 2:
        mx, mn = _endpoint_fallback(maxima, minima, x)
        return mx, mn, True
    mx = _slope_extend(maxima, n)
    mn = _slope_extend(minima, n)
    for end, (a, b) in ((0, (0, 1)), (n - 1, (-1, -2))):
        upper = _line_at(mx.index[a], mx.value[a], mx.index[b], mx.value[b], end)
        lower = _line_at(mn.index[a], mn.value[a], mn.index[b], mn.value[b], end)
        if x[end] > upper:
            mx = _insert(mx, end, x[end])
        if x[end] < lower:
            mn = _insert(mn, end, x[end])
    return mx, mn, False


def extend_extrema_mirror(maxima: Extrema, minima: Extrema, signal, n_sym: int = 2):
    """Reflect the outermost ``n_sym`` extrema of each kind about the endpoints."""
    x = np.asarray(signal, dtype=float)
    n = len(x)
    if len(maxima) < 2 or len(minima) < 2:
        mx, mn = _endpoint_fallback(maxima, minima, x)
        return mx, mn, True

    def reflect(ext):
        k = min(n_sym, len(ext))
        left_i, left_v = -ext.index[:k][::-1], ext.value[:k][::-1]
        right_i = 2 * (n - 1) - ext.index[-k:][::-1]
        right_v = ext.value[-k:][::-1]
        idx = np.concatenate((left_i, ext.index, right_i))
        val = np.concatenate((left_v, ext.value, right_v))
        keep = np.concatenate(([True], np.diff(idx) > 0))
        return Extrema(idx[keep].astype(np.int64), val[keep])

    return reflect(maxima), reflect(minima), False


def extend_extrema(maxima, minima, signal, mode):
    mode = BoundaryMode(mode)
    if mode is BoundaryMode.SBM:
        return extend_extrema_sbm(maxima, minima, signal)
    if mode is BoundaryMode.MIRROR:
        return extend_extrema_mirror(maxima, minima, signal)
    return maxima, minima, False


def spline_envelope(
    extrema: Extrema, n: int, bc_type="natural", extrapolate: bool = True
) -> np.ndarray:
    """Cubic spline through ``extrema`` evaluated on ``0..n-1``.

    Two knots give the straight line through them.  Outside the knot span the
    end pieces are extrapolated, or held at the end-knot values when
    ``extrapolate`` is False.
    """
    idx, val = np.asarray(extrema[0], dtype=float), np.asarray(extrema[1], dtype=float)
    if len(idx) < 2:
        raise InsufficientKnotsError(f"need >= 2 knots, got {len(idx)}")
    grid = np.arange(n, dtype=float)
    if not extrapolate:
        grid = np.clip(grid, idx[0], idx[-1])
    if len(idx) == 2:
        return val[0] + (val[1] - val[0]) * (grid - idx[0]) / (idx[1] - idx[0])
    return CubicSpline(idx, val, bc_type=bc_type, extrapolate=True)(grid)


def _envelope_mean(h, mode):
    maxima, minima = find_extrema(h)
    if len(maxima) < 2 or len(minima) < 2:
        return None
    maxima, minima, _ = extend_extrema(maxima, minima, h, mode)
    n = len(h)
    extrapolate = BoundaryMode(mode) is not BoundaryMode.TRUNCATE
    upper = spline_envelope(maxima, n, extrapolate=extrapolate)
    lower = spline_envelope(minima, n, extrapolate=extrapolate)
    return 0.5 * (upper + lower)


def sift(signal, config: SiftConfig = SiftConfig()) -> np.ndarray:
    """Extract one IMF from ``signal``.

    Sifting stops when the SD criterion drops below ``config.sd_threshold``,
    after ``config.max_sift_iterations`` passes, or when the candidate loses
    the extrema needed for envelopes.

    Raises
    ------
    NotSiftableError
        If ``signal`` has fewer than two maxima or two minima.
    """
    h = np.array(signal, dtype=float)
    mean = _envelope_mean(h, config.boundary_mode)
    if mean is None:
        raise NotSiftableError("signal needs at least 2 maxima and 2 minima")
    for _ in range(config.max_sift_iterations):
        h_new = h - mean
        denom = np.sum(h * h)
        sd = np.sum((h - h_new) ** 2) / denom if denom > 0 else 0.0
        h = h_new
        if sd < config.sd_threshold:
            break
        mean = _envelope_mean(h, config.boundary_mode)
        if mean is None:
            break
    return h


def _is_done(r: np.ndarray) -> bool:
    maxima, minima = find_extrema(r)
    return len(maxima) < 2 or len(minima) < 2


def decompose(signal, config: SiftConfig = SiftConfig()) -> Decomposition:
    """Decompose ``signal`` into IMFs (highest frequency first) and a residue."""
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or len(x) < 8:
        raise DataError("decomposition needs a 1-D signal of length >= 8")
    imfs = []
    residue = x.copy()
    while len(imfs) < config.max_imfs and not _is_done(residue):
        try:
            imf = sift(residue, config)
        except NotSiftableError:
            break
        imf.setflags(write=False)
        imfs.append(imf)
        residue = residue - imf
    residue.setflags(write=False)
    return Decomposition(tuple(imfs), residue)


def reconstruct(dec: Decomposition) -> np.ndarray:
    n = len(dec.residue)
    total = np.array(dec.residue, dtype=float)
    for imf in dec.imfs:
        if len(imf) != n:
            raise CorruptDecompositionError("component lengths differ")
        total = total + imf
    return total
