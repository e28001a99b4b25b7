"""Delay-coordinate reconstruction of a scalar series, plus lag and dimension estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateInputError, InsufficientDataError, InvalidInputError, InvalidParameterError

MI_BINS = 16
FNN_RATIO = 15.0
FNN_ATTRACTOR_RATIO = 2.0
FNN_FRACTION = 0.01


@dataclass(frozen=True, eq=False)
class TimeSeries:
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise InvalidInputError(f"dt must be positive and finite, got {self.dt}")
        if values.size < 1:
            raise InvalidInputError("time series must have at least one sample")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("time series contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class EmbeddingSpec:
    tau: int
    k: int

    def __post_init__(self):
        if int(self.tau) != self.tau or self.tau < 1:
            raise InvalidParameterError(f"tau must be an integer >= 1, got {self.tau}")
        if int(self.k) != self.k or self.k < 1:
            raise InvalidParameterError(f"k must be an integer >= 1, got {self.k}")

    @property
    def window(self) -> int:
        """Samples spanned by one embedded point."""
        return (self.k - 1) * self.tau + 1


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Embedded points; row ``i`` was built from samples ending at ``source_index[i]``."""

    k: int
    points: np.ndarray
    source_index: np.ndarray
    tau: int | None = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1) if self.k == 1 else points.reshape(-1, self.k)
        src = np.asarray(self.source_index, dtype=np.int64).reshape(-1)
        if points.shape[1] != self.k:
            raise InvalidInputError(f"points have {points.shape[1]} columns, expected k={self.k}")
        if points.shape[0] != src.size:
            raise InvalidInputError("points and source_index differ in length")
        if not np.all(np.isfinite(points)):
            raise InvalidInputError("point cloud contains non-finite coordinates")
        if src.size > 1 and np.any(np.diff(src) <= 0):
            raise InvalidInputError("source_index must be strictly increasing")
        points.setflags(write=False)
        src.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "source_index", src)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (
            self.k == other.k
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.source_index, other.source_index)
        )

    def subset(self, mask) -> "PointCloud":
        return PointCloud(self.k, self.points[mask], self.source_index[mask], self.tau)


def delay_embed(series: TimeSeries, spec: EmbeddingSpec) -> PointCloud:
    """Build ``(x(t), x(t - tau), ..., x(t - (k-1) tau))`` for every admissible ``t``.

    Points are ordered by ``t``; the newest sample is coordinate 0.
    """
    x = series.values
    need = spec.window
    if x.size < need:
        raise InsufficientDataError(
            f"series of length {x.size} too short for tau={spec.tau}, k={spec.k}; need at least {need} samples"
        )
    t = np.arange(need - 1, x.size)
    offsets = np.arange(spec.k) * spec.tau
    points = x[t[:, None] - offsets[None, :]]
    return PointCloud(spec.k, points, t, spec.tau)


def _mutual_information(a: np.ndarray, b: np.ndarray, edges: np.ndarray) -> float:
    """Plug-in mutual information (nats) on a fixed equal-width grid."""
    joint, _, _ = np.histogram2d(a, b, bins=[edges, edges])
    pxy = joint / joint.sum()
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    nz = pxy > 0
    return float(np.sum(pxy[nz] * np.log(pxy[nz] / np.outer(px, py)[nz])))


def lagged_mutual_information(series: TimeSeries, max_lag: int, bins: int = MI_BINS) -> np.ndarray:
    """MI between ``x(t)`` and ``x(t + lag)`` for lags ``0..max_lag``."""
    x = series.values
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        raise DegenerateInputError("constant series has no lag structure")
    edges = np.linspace(lo, hi, bins + 1)
    return np.array([_mutual_information(x[: x.size - lag], x[lag:], edges) for lag in range(max_lag + 1)])


def autocorrelation(series: TimeSeries, max_lag: int) -> np.ndarray:
    x = series.values - series.values.mean()
    var = float(np.dot(x, x))
    if var == 0.0:
        raise DegenerateInputError("constant series has no lag structure")
    return np.array([np.dot(x[: x.size - lag], x[lag:]) / var for lag in range(max_lag + 1)])


def estimate_tau(series: TimeSeries, max_lag: int) -> int:
    """Embedding lag from the first minimum of binned MI, else first lag with autocorrelation < 1/e.

    MI differences smaller than a quarter of the plug-in estimator's independence
    bias ``(bins - 1)^2 / 2N`` are treated as ties. The first minimum is then the first
    lag after which MI stops falling. From there the basin is followed until MI
    rises clearly above its lowest value, and the middle of the lags lying within
    the tie band of that lowest value is returned. A lag whose MI is already at the independence
    floor (twice the bias) is returned immediately.
    """
    if max_lag < 1:
        raise InvalidParameterError("max_lag must be >= 1")
    x = series.values
    if x.size <= 2 * max_lag:
        raise InsufficientDataError(f"need more than {2 * max_lag} samples for max_lag={max_lag}, got {x.size}")
    if float(x.min()) == float(x.max()):
        raise DegenerateInputError("constant series has no lag structure")

    mi = lagged_mutual_information(series, max_lag + 1)
    bias = (MI_BINS - 1) ** 2 / (2.0 * (x.size - max_lag - 1))
    tie = 0.25 * bias
    for lag in range(1, max_lag + 1):
        if mi[lag] <= 2.0 * bias:
            return lag
        if mi[lag + 1] >= mi[lag] - tie:
            # follow the shallow basin until MI climbs clearly above its minimum
            lowest = mi[lag]
            stop = lag + 1
            while stop <= max_lag and mi[stop] <= lowest + tie:
                lowest = min(lowest, mi[stop])
                stop += 1
            if stop > max_lag:
                break
            near = [j for j in range(lag, stop) if mi[j] <= lowest + tie]
            return (near[0] + near[-1]) // 2

    acf = autocorrelation(series, max_lag)
    below = np.nonzero(acf[1:] < 1.0 / math.e)[0]
    if below.size:
        return int(below[0]) + 1
    return max_lag


class DimensionEstimate(NamedTuple):
    k: int
    saturated: bool
    fractions: tuple


def false_neighbor_fraction(series: TimeSeries, tau: int, k: int, theiler: int = 0) -> float:
    """Fraction of nearest neighbours in dimension ``k`` that separate when a coordinate is added.

    The added coordinate is the next sample in forward time, ``x(t + tau)``, so the
    test follows the flow rather than its strongly expanding inverse. A neighbour is
    false when the new coordinate's separation exceeds ``FNN_RATIO`` times the
    k-dimensional distance, or when the (k+1)-dimensional distance exceeds
    ``FNN_ATTRACTOR_RATIO`` times the series standard deviation.
    """
    x = series.values
    hi = EmbeddingSpec(tau, k + 1)
    if x.size < hi.window + 1:
        raise InsufficientDataError(f"need at least {hi.window + 1} samples to test k={k}")
    cloud = delay_embed(series, EmbeddingSpec(tau, k)).points[:-tau]
    extra = x[k * tau :]
    n = cloud.shape[0]
    tree = cKDTree(cloud)
    want = min(n, 2 + 2 * theiler)
    dist, idx = tree.query(cloud, k=want)
    dist = dist.reshape(n, -1)
    idx = idx.reshape(n, -1)
    rows = np.arange(n)
    valid = np.abs(idx - rows[:, None]) > theiler
    first = np.argmax(valid, axis=1)
    has = valid[rows, first]
    if not np.any(has):
        raise InsufficientDataError("no admissible neighbours")
    i = rows[has]
    j = idx[rows, first][has]
    d_k = dist[rows, first][has]
    sep = np.abs(extra[i] - extra[j])
    sigma = float(np.std(x))
    # distances at rounding level carry no geometric information
    floor = 1e-10 * sigma
    false = (sep > FNN_RATIO * np.maximum(d_k, floor)) | (np.sqrt(d_k**2 + sep**2) > FNN_ATTRACTOR_RATIO * sigma)
    return float(np.mean(false))


def estimate_k(series: TimeSeries, tau: int, k_max: int, theiler: int = 0) -> DimensionEstimate:
    """Smallest ``k <= k_max`` with false-neighbour fraction below 1%."""
    if k_max < 1:
        raise InvalidParameterError("k_max must be >= 1")
    x = series.values
    need = EmbeddingSpec(tau, k_max + 1).window + 1
    if x.size < need:
        raise InsufficientDataError(f"need at least {need} samples to test up to k={k_max}, got {x.size}")
    if float(x.min()) == float(x.max()):
        raise DegenerateInputError("constant series has no embedding dimension")
    fractions = []
    for k in range(1, k_max + 1):
        frac = false_neighbor_fraction(series, tau, k, theiler)
        fractions.append(frac)
        if frac < FNN_FRACTION:
            return DimensionEstimate(k, False, tuple(fractions))
    return DimensionEstimate(k_max, True, tuple(fractions))
