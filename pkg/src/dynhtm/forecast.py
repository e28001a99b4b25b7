"""Near-neighbour transition forecasting, multi-mode prediction and regime tracking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .embedding import PointCloud
from .errors import InsufficientDataError, InvalidInputError, InvalidParameterError

EXTRAPOLATION_FACTOR = 3.0


def euclidean(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean distance; the single distance formula used for all reported neighbours."""
    diff = points - q
    return np.sqrt(np.sum(diff * diff, axis=1))


@dataclass(frozen=True, eq=False)
class TransitionLibrary:
    """Embedded points and the displacement each one underwent ``horizon`` samples later."""

    k: int
    horizon: int
    points: np.ndarray
    displacements: np.ndarray
    source_index: np.ndarray
    regime_label: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.k)
        disp = np.asarray(self.displacements, dtype=float).reshape(-1, self.k)
        if pts.shape != disp.shape:
            raise InvalidInputError("points and displacements differ in shape")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(disp))):
            raise InvalidInputError("library contains non-finite values")
        for arr in (pts, disp):
            arr.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "displacements", disp)
        object.__setattr__(self, "source_index", np.asarray(self.source_index, dtype=np.int64))
        if self.regime_label is not None:
            object.__setattr__(self, "regime_label", np.asarray(self.regime_label, dtype=np.int64))

    def __len__(self):
        return self.points.shape[0]

    @property
    def tree(self) -> cKDTree:
        if "tree" not in self._cache:
            self._cache["tree"] = cKDTree(self.points)
        return self._cache["tree"]

    @property
    def typical_spacing(self) -> float:
        """95th percentile of each library point's distance to its nearest other point."""
        if "spacing" not in self._cache:
            if len(self) < 2:
                self._cache["spacing"] = 0.0
            else:
                d, _ = self.tree.query(self.points, k=2)
                self._cache["spacing"] = float(np.percentile(d[:, 1], 95))
        return self._cache["spacing"]

    def labels(self) -> np.ndarray:
        if self.regime_label is None:
            raise InvalidParameterError("library has no regime labels")
        return np.unique(self.regime_label)

    def restricted(self, label: int) -> "TransitionLibrary":
        key = ("label", int(label))
        if key not in self._cache:
            mask = self.regime_label == label
            self._cache[key] = (
                TransitionLibrary(
                    self.k, self.horizon, self.points[mask], self.displacements[mask],
                    self.source_index[mask], self.regime_label[mask],
                ),
                np.nonzero(mask)[0],
            )
        return self._cache[key]


def build_library(cloud: PointCloud, horizon: int, labels=None) -> TransitionLibrary:
    """Pair each point with the point ``horizon`` samples later.

    ``labels`` is an optional per-sample regime label, indexed by source index; each
    library entry takes the label active at its own source index.
    """
    if int(horizon) != horizon or horizon < 1:
        raise InvalidParameterError(f"horizon must be an integer >= 1, got {horizon}")
    src = cloud.source_index
    pos = np.searchsorted(src, src + horizon)
    ok = pos < src.size
    ok[ok] = src[pos[ok]] == src[ok] + horizon
    if np.count_nonzero(ok) < 2:
        raise InsufficientDataError(
            f"fewer than 2 usable transitions at horizon {horizon} from {len(cloud)} points"
        )
    start = cloud.points[ok]
    end = cloud.points[pos[ok]]
    regime = None
    if labels is not None:
        regime = np.asarray(labels)[src[ok]]
    return TransitionLibrary(cloud.k, int(horizon), start, end - start, src[ok], regime)


class NeighborQueryResult(NamedTuple):
    indices: np.ndarray
    distances: np.ndarray
    truncated: bool


def query_knn(lib: TransitionLibrary, q, kn: int) -> NeighborQueryResult:
    """The ``kn`` library points nearest ``q``; equal distances go to the lower index.

    The KD-tree only nominates candidates. Everything within the tree's ``kn``-th
    distance (plus a relative slack for rounding) is re-measured with
    :func:`euclidean` and ranked by ``(distance, index)``, which makes the result
    identical to an exhaustive scan.
    """
    if kn < 1:
        raise InvalidParameterError(f"kn must be >= 1, got {kn}")
    n = len(lib)
    if n == 0:
        raise InsufficientDataError("empty library")
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != lib.k:
        raise InvalidInputError(f"query has dimension {q.size}, library has {lib.k}")
    truncated = kn > n
    kn = min(kn, n)
    if kn == n:
        cand = np.arange(n)
    else:
        d, _ = lib.tree.query(q, k=kn)
        radius = float(np.atleast_1d(d)[-1])
        radius = radius * (1 + 1e-9) + 1e-12
        cand = np.asarray(lib.tree.query_ball_point(q, radius), dtype=np.int64)
    dist = euclidean(lib.points[cand], q)
    order = np.lexsort((cand, dist))[:kn]
    return NeighborQueryResult(cand[order], dist[order], truncated)


def neighbor_weights(distances: np.ndarray) -> np.ndarray:
    """Normalised ``exp(-d / mean(d))``; uniform when every distance is zero."""
    mean = float(np.mean(distances))
    if mean == 0.0:
        u = np.ones_like(distances)
    else:
        u = np.exp(-distances / mean)
    return u / u.sum()


@dataclass(frozen=True, eq=False)
class Prediction:
    mean: np.ndarray
    spread: np.ndarray
    weight: float
    members: np.ndarray
    extrapolated: bool = False
    label: int | None = None


def _combine(lib, q, members, distances, weight=1.0, label=None) -> Prediction:
    u = neighbor_weights(distances)
    targets = q + lib.displacements[members]
    mean = q + u @ lib.displacements[members]
    spread = np.sqrt(u @ (targets - mean) ** 2)
    far = lib.typical_spacing * EXTRAPOLATION_FACTOR
    extrapolated = bool(distances[0] > far) if len(lib) > 1 else False
    return Prediction(mean, spread, float(weight), np.asarray(members), extrapolated, label)


def predict_next(lib: TransitionLibrary, q, kn: int) -> Prediction:
    """Distance-weighted average of the neighbours' displacements, applied at ``q``."""
    q = np.asarray(q, dtype=float).reshape(-1)
    res = query_knn(lib, q, kn)
    return _combine(lib, q, res.indices, res.distances)


@dataclass(frozen=True)
class PredictionSet:
    modes: tuple

    def __post_init__(self):
        total = sum(m.weight for m in self.modes)
        if not self.modes or abs(total - 1.0) > 1e-9:
            raise InvalidInputError(f"mode weights must sum to 1, got {total}")

    def __len__(self):
        return len(self.modes)

    def __getitem__(self, i):
        return self.modes[i]


def single_linkage(vectors: np.ndarray, gap_factor: float) -> list:
    """Connected components of the graph linking vectors closer than ``gap_factor`` x median nearest gap."""
    m = vectors.shape[0]
    if m == 1:
        return [np.array([0])]
    d = np.sqrt(((vectors[:, None, :] - vectors[None, :, :]) ** 2).sum(axis=2))
    off = d + np.diag(np.full(m, np.inf))
    cut = gap_factor * float(np.median(off.min(axis=1)))
    adj = d <= cut
    comp = -np.ones(m, dtype=np.int64)
    groups = []
    for seed in range(m):
        if comp[seed] >= 0:
            continue
        comp[seed] = len(groups)
        stack, members = [seed], [seed]
        while stack:
            i = stack.pop()
            for j in np.nonzero(adj[i] & (comp < 0))[0]:
                comp[j] = len(groups)
                stack.append(j)
                members.append(j)
        groups.append(np.sort(np.array(members)))
    return groups


def _sorted_set(modes) -> PredictionSet:
    total = sum(m.weight for m in modes)
    modes = [Prediction(m.mean, m.spread, m.weight / total, m.members, m.extrapolated, m.label) for m in modes]
    modes.sort(key=lambda m: (-m.weight, int(m.members.min())))
    return PredictionSet(tuple(modes))


def predict_multi(lib: TransitionLibrary, q, kn: int, gap_factor: float = 3.0, by_label: bool = False) -> PredictionSet:
    """One prediction per distinct group of neighbour transitions.

    By default the neighbours' displacements are grouped by single linkage. With
    ``by_label`` the library's regime labels define the groups instead, and the
    ``kn`` nearest neighbours are drawn from each regime separately.
    """
    if not gap_factor > 1:
        raise InvalidParameterError(f"gap_factor must exceed 1, got {gap_factor}")
    q = np.asarray(q, dtype=float).reshape(-1)
    if by_label:
        return _predict_by_label(lib, q, kn)
    res = query_knn(lib, q, kn)
    u = neighbor_weights(res.distances)
    modes = []
    for group in single_linkage(lib.displacements[res.indices], gap_factor):
        pred = _combine(lib, q, res.indices[group], res.distances[group], weight=u[group].sum())
        modes.append(pred)
    return _sorted_set(modes)


def _predict_by_label(lib, q, kn):
    found = []
    for label in lib.labels():
        sub, index = lib.restricted(label)
        res = query_knn(sub, q, kn)
        found.append((int(label), index[res.indices], res.distances))
    all_d = np.concatenate([d for _, _, d in found])
    scale = float(np.mean(all_d))
    modes = []
    for label, members, dist in found:
        w = float(np.sum(np.exp(-dist / scale))) if scale > 0 else float(dist.size)
        modes.append(_combine(lib, q, members, dist, weight=w, label=label))
    return _sorted_set(modes)


def correction_vector(pred: PredictionSet, actual) -> tuple:
    """Index of the mode nearest the observed state, and the observed-minus-predicted residual."""
    actual = np.asarray(actual, dtype=float).reshape(-1)
    if len(pred) == 0:
        raise InvalidInputError("empty prediction set")
    dists = [float(np.linalg.norm(actual - m.mean)) for m in pred.modes]
    best = int(np.argmin(dists))
    return best, actual - pred.modes[best].mean


@dataclass(frozen=True)
class RegimeTrackerState:
    """Exponentially weighted credit for each regime whose prediction came true."""

    decay: float = 0.05
    credits: tuple = ()

    def __post_init__(self):
        if not 0 < self.decay < 1:
            raise InvalidParameterError(f"decay must lie in (0, 1), got {self.decay}")
        object.__setattr__(self, "credits", tuple(sorted((int(r), float(c)) for r, c in dict(self.credits).items())))

    def credit(self, regime: int) -> float:
        return dict(self.credits).get(regime, 0.0)

    @property
    def current(self) -> int | None:
        if not self.credits:
            return None
        return max(self.credits, key=lambda rc: (rc[1], -rc[0]))[0]


def track_regimes(state: RegimeTrackerState, fulfilled_regime: int) -> RegimeTrackerState:
    credits = dict(state.credits)
    credits.setdefault(int(fulfilled_regime), 0.0)
    a = state.decay
    updated = {r: min(1.0, max(0.0, (1 - a) * c + a * (r == fulfilled_regime))) for r, c in credits.items()}
    return RegimeTrackerState(state.decay, tuple(updated.items()))
