"""Coupling detection between reconstructed systems: rank-based L-index and convergent cross mapping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .embedding import EmbeddingSpec, PointCloud, TimeSeries, delay_embed
from .errors import AlignmentError, InsufficientDataError, InvalidParameterError
from .forecast import neighbor_weights

VERDICTS = ("independent", "x_drives_y", "y_drives_x", "bidirectional")


def default_theiler(cloud: PointCloud) -> int:
    return (cloud.tau or 0) * cloud.k


def align(x: PointCloud, y: PointCloud) -> tuple:
    """Restrict both clouds to their common source indices."""
    common = np.intersect1d(x.source_index, y.source_index)
    return (
        x.subset(np.isin(x.source_index, common)),
        y.subset(np.isin(y.source_index, common)),
    )


def _squared_distances(points: np.ndarray, chunk: int = 512) -> np.ndarray:
    n = points.shape[0]
    out = np.empty((n, n))
    for lo in range(0, n, chunk):
        diff = points[lo : lo + chunk, None, :] - points[None, :, :]
        out[lo : lo + chunk] = np.sum(diff * diff, axis=2)
    return out


@dataclass(frozen=True, eq=False)
class RankNeighborhood:
    """Per-anchor neighbour order and ranks over the admissible (non-excluded) points.

    ``ranks[i, j]`` runs over ``1..counts[i]`` for admissible ``j`` and is 0 for the
    anchor itself and for points inside the exclusion window.
    """

    order: np.ndarray
    ranks: np.ndarray
    counts: np.ndarray
    theiler_w: int

    def neighbors(self, k: int) -> np.ndarray:
        return self.order[:, :k]


def rank_neighborhood(cloud: PointCloud, theiler_w: int = 0) -> RankNeighborhood:
    return _ranks(_squared_distances(cloud.points), cloud.source_index, theiler_w)


def _ranks(d2: np.ndarray, src: np.ndarray, theiler_w: int) -> RankNeighborhood:
    n = d2.shape[0]
    excluded = np.abs(src[:, None] - src[None, :]) <= theiler_w
    d2[excluded] = np.inf
    order = np.argsort(d2, axis=1, kind="stable")
    counts = n - excluded.sum(axis=1)
    ranks = np.zeros((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(1, n + 1)[None, :]
    ranks[excluded] = 0
    return RankNeighborhood(order, ranks, counts, theiler_w)


@dataclass(frozen=True)
class LIndexResult:
    l_xy: float
    l_yx: float
    k: int
    n: int


def _l_directed(rx: RankNeighborhood, ry: RankNeighborhood, k: int) -> float:
    """L(X|Y): how compact Y's neighbourhoods remain when measured by X-ranks."""
    n = rx.ranks.shape[0]
    nbrs = ry.neighbors(k)
    conditional = rx.ranks[np.arange(n)[:, None], nbrs].sum(axis=1) / k
    mean_rank = (rx.counts + 1) / 2.0
    minimal = (k + 1) / 2.0
    return float(np.mean((mean_rank - conditional) / (mean_rank - minimal)))


def _check_pair(x: PointCloud, y: PointCloud, k: int, theiler_w: int):
    if len(x) != len(y) or not np.array_equal(x.source_index, y.source_index):
        raise AlignmentError("clouds must share identical source indices; use align() first")
    n = len(x)
    if theiler_w < 0:
        raise InvalidParameterError("theiler_w must be >= 0")
    if not 1 <= k <= n - 2 - 2 * theiler_w:
        raise InvalidParameterError(f"k={k} outside [1, {n - 2 - 2 * theiler_w}] for N={n}, theiler_w={theiler_w}")


def l_index(x: PointCloud, y: PointCloud, k: int, theiler_w: int | None = None) -> LIndexResult:
    """Both directions of the normalised rank L-index; ``L(X|X)`` is exactly 1."""
    if theiler_w is None:
        theiler_w = max(default_theiler(x), default_theiler(y))
    _check_pair(x, y, k, theiler_w)
    rx = rank_neighborhood(x, theiler_w)
    ry = rank_neighborhood(y, theiler_w)
    return LIndexResult(_l_directed(rx, ry, k), _l_directed(ry, rx, k), k, len(x))


def circular_shift(cloud: PointCloud, shift: int) -> PointCloud:
    """Rotate the points against their source indices, keeping the indices in place."""
    return PointCloud(cloud.k, np.roll(cloud.points, -shift, axis=0), cloud.source_index, cloud.tau)


@dataclass(frozen=True)
class SynchronyResult:
    verdict: str
    l_xy: float
    l_yx: float
    threshold_xy: float
    threshold_yx: float
    surrogates_xy: tuple
    surrogates_yx: tuple

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "l_xy": self.l_xy,
            "l_yx": self.l_yx,
            "threshold_xy": self.threshold_xy,
            "threshold_yx": self.threshold_yx,
        }


def synchrony_test(
    x: PointCloud,
    y: PointCloud,
    k: int,
    theiler_w: int | None = None,
    n_surrogates: int = 20,
    seed: int = 0,
    min_effect: float = 0.1,
) -> SynchronyResult:
    """Classify coupling from the L-index against circularly shifted surrogates.

    A direction is significant when its L exceeds the 95th percentile of the
    surrogate values and also ``min_effect``. A significant ``L(X|Y)`` means Y's
    neighbourhoods identify X's, i.e. Y carries X's state: X drives Y.
    """
    if theiler_w is None:
        theiler_w = max(default_theiler(x), default_theiler(y))
    _check_pair(x, y, k, theiler_w)
    n = len(x)
    rng = np.random.default_rng(seed)
    rx = rank_neighborhood(x, theiler_w)
    ry = rank_neighborhood(y, theiler_w)
    l_xy, l_yx = _l_directed(rx, ry, k), _l_directed(ry, rx, k)

    lo, hi = max(1, n // 10), max(2, n - n // 10)
    dy = _squared_distances(y.points)
    sur_xy, sur_yx = [], []
    for shift in rng.integers(lo, hi, size=n_surrogates):
        # distances of the rotated cloud are the rotated distance matrix
        rolled = np.roll(np.roll(dy, -int(shift), axis=0), -int(shift), axis=1)
        rs = _ranks(rolled, y.source_index, theiler_w)
        sur_xy.append(_l_directed(rx, rs, k))
        sur_yx.append(_l_directed(rs, rx, k))
    thr_xy = float(np.percentile(sur_xy, 95))
    thr_yx = float(np.percentile(sur_yx, 95))
    sig_xy = l_xy > max(thr_xy, min_effect)
    sig_yx = l_yx > max(thr_yx, min_effect)
    verdict = {
        (False, False): "independent",
        (True, False): "x_drives_y",
        (False, True): "y_drives_x",
        (True, True): "bidirectional",
    }[(sig_xy, sig_yx)]
    return SynchronyResult(verdict, l_xy, l_yx, thr_xy, thr_yx, tuple(sur_xy), tuple(sur_yx))


@dataclass(frozen=True, eq=False)
class CCMCurve:
    library_sizes: np.ndarray
    skill: np.ndarray
    direction: str


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = np.std(a), np.std(b)
    if sa == 0 or sb == 0:
        return 0.0
    r = float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))
    return min(1.0, max(-1.0, r))


def ccm_skill(
    target: TimeSeries,
    source: TimeSeries,
    spec: EmbeddingSpec,
    library_sizes,
    kn: int | None = None,
    seed: int = 0,
    exclusion: int = 0,
    direction: str | None = None,
) -> CCMCurve:
    """Cross-map ``target`` from the delay reconstruction of ``source``.

    For each library size a seeded random subset of the source manifold serves as
    the library; every embedded point is then estimated from its ``kn`` nearest
    library neighbours, skipping neighbours within ``exclusion`` samples of it (the
    point itself is always skipped). Skill is the Pearson correlation between estimated
    and true target values.
    """
    if len(target) != len(source):
        raise AlignmentError("target and source must have equal length")
    kn = spec.k + 1 if kn is None else kn
    cloud = delay_embed(source, spec)
    n = len(cloud)
    sizes = np.asarray(sorted(int(s) for s in library_sizes), dtype=np.int64)
    if sizes.size == 0 or sizes[0] < kn + 1 or sizes[-1] > n:
        raise InsufficientDataError(f"library sizes must lie in [{kn + 1}, {n}] for {n} embedded points")
    truth = target.values[cloud.source_index]
    rng = np.random.default_rng(seed)
    skills = []
    for size in sizes:
        chosen = np.sort(rng.choice(n, size=size, replace=False))
        tree = cKDTree(cloud.points[chosen])
        want = min(size, kn + 2 * exclusion + 1)
        dist, idx = tree.query(cloud.points, k=want)
        dist, idx = dist.reshape(n, -1), idx.reshape(n, -1)
        lib_src = cloud.source_index[chosen][idx]
        ok = np.abs(lib_src - cloud.source_index[:, None]) > exclusion
        est = np.empty(n)
        for i in range(n):
            sel = np.nonzero(ok[i])[0][:kn]
            w = neighbor_weights(dist[i, sel])
            est[i] = w @ truth[chosen[idx[i, sel]]]
        skills.append(_pearson(est, truth))
    return CCMCurve(sizes, np.asarray(skills), direction or "target_from_source")
