import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dynhtm.embedding import EmbeddingSpec, PointCloud, TimeSeries, delay_embed
from dynhtm.errors import InsufficientDataError, InvalidParameterError
from dynhtm.forecast import (
    Prediction,
    PredictionSet,
    RegimeTrackerState,
    TransitionLibrary,
    build_library,
    correction_vector,
    euclidean,
    neighbor_weights,
    predict_multi,
    predict_next,
    query_knn,
    single_linkage,
    track_regimes,
)


def brute_force(points, q, kn):
    d = np.sqrt(((points - q) ** 2).sum(axis=1))
    order = sorted(range(len(points)), key=lambda i: (d[i], i))[:kn]
    return np.array(order), d[order]


def library(points, displacements=None, labels=None):
    points = np.asarray(points, dtype=float)
    if displacements is None:
        displacements = np.zeros_like(points)
    return TransitionLibrary(points.shape[1], 1, points, displacements, np.arange(len(points)), labels)


def test_build_library_hand_example():
    cloud = delay_embed(TimeSeries(1, [1, 2, 3, 4, 5]), EmbeddingSpec(1, 1))
    lib = build_library(cloud, 1)
    assert lib.points[:, 0].tolist() == [1, 2, 3, 4]
    assert lib.displacements[:, 0].tolist() == [1, 1, 1, 1]


def test_build_library_skips_gaps():
    cloud = PointCloud(1, [[0], [1], [2], [10], [11]], [0, 1, 2, 5, 6])
    lib = build_library(cloud, 1)
    assert lib.source_index.tolist() == [0, 1, 5]
    assert lib.displacements[:, 0].tolist() == [1, 1, 1]


def test_build_library_errors():
    cloud = delay_embed(TimeSeries(1, np.arange(5.0)), EmbeddingSpec(1, 1))
    with pytest.raises(InsufficientDataError):
        build_library(cloud, 5)
    with pytest.raises(InvalidParameterError):
        build_library(cloud, 0)


def test_constant_series_gives_static_prediction():
    cloud = delay_embed(TimeSeries(1, np.full(50, 2.5)), EmbeddingSpec(2, 3))
    lib = build_library(cloud, 3)
    assert np.all(lib.displacements == 0)
    p = predict_next(lib, [2.5, 2.5, 2.5], 5)
    assert p.mean.tolist() == [2.5, 2.5, 2.5] and np.all(p.spread == 0)


@st.composite
def library_and_query(draw):
    k = draw(st.integers(1, 4))
    n = draw(st.integers(1, 60))
    # a coarse grid produces many exact distance ties
    pts = draw(arrays(np.float64, (n, k), elements=st.integers(-3, 3).map(float)))
    q = draw(arrays(np.float64, (k,), elements=st.floats(-4, 4, allow_nan=False).map(lambda v: round(v * 2) / 2)))
    kn = draw(st.integers(1, n + 3))
    return pts, q, kn


@settings(max_examples=300)
@given(library_and_query())
def test_knn_equals_exhaustive_scan(case):
    pts, q, kn = case
    res = query_knn(library(pts), q, kn)
    idx, dist = brute_force(pts, q, kn)
    assert res.indices.tolist() == idx.tolist()
    assert res.distances.tolist() == dist.tolist()
    assert res.truncated == (kn > len(pts))
    assert np.all(np.diff(res.distances) >= 0)


def test_knn_query_on_library_point():
    pts = np.random.default_rng(0).normal(size=(100, 3))
    res = query_knn(library(pts), pts[17], 4)
    assert res.indices[0] == 17 and res.distances[0] == 0.0


def test_knn_all_points():
    pts = np.random.default_rng(1).normal(size=(30, 2))
    res = query_knn(library(pts), np.zeros(2), 30)
    assert sorted(res.indices.tolist()) == list(range(30))
    assert np.all(np.diff(res.distances) >= 0)


def test_distance_formula_is_shared():
    pts = np.random.default_rng(2).normal(size=(50, 3))
    q = np.ones(3)
    res = query_knn(library(pts), q, 50)
    assert res.distances.tolist() == euclidean(pts, q)[res.indices].tolist()


def test_weights():
    assert neighbor_weights(np.zeros(4)).tolist() == [0.25] * 4
    w = neighbor_weights(np.array([1.0, 2.0, 3.0]))
    assert w.sum() == pytest.approx(1.0)
    assert np.all(np.diff(w) < 0)
    assert w[0] / w[1] == pytest.approx(np.exp(0.5))


def test_kn_one_uses_nearest_displacement():
    pts = np.array([[0.0, 0], [1, 0], [5, 5]])
    disp = np.array([[1.0, 2], [3, 4], [5, 6]])
    p = predict_next(library(pts, disp), [0.9, 0.1], 1)
    assert p.mean.tolist() == [0.9 + 3, 0.1 + 4]
    assert p.weight == 1.0 and p.members.tolist() == [1]


@settings(max_examples=50)
@given(arrays(np.float64, (3,), elements=st.floats(-5, 5)), st.integers(0, 1000))
def test_translation_flow_is_exact(shift, seed):
    pts = np.random.default_rng(seed).normal(size=(200, 3))
    lib = library(pts, np.tile(shift, (200, 1)))
    q = np.random.default_rng(seed + 1).normal(size=3)
    p = predict_next(lib, q, 4)
    assert np.allclose(p.mean, q + shift, rtol=1e-9, atol=1e-9)
    assert np.allclose(p.spread, 0, atol=1e-9)


def test_affine_flow_is_exact_at_weighted_centroid():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 2))
    b = rng.normal(size=2)
    pts = rng.normal(size=(400, 2))
    lib = library(pts, pts @ a.T + b)
    q = np.array([0.1, -0.2])
    res = query_knn(lib, q, 6)
    u = neighbor_weights(res.distances)
    centroid = u @ pts[res.indices]
    p = predict_next(lib, q, 6)
    assert np.allclose(p.mean, q + centroid @ a.T + b, rtol=1e-9, atol=1e-12)


def test_extrapolation_flag():
    pts = np.random.default_rng(0).uniform(0, 1, size=(500, 2))
    lib = library(pts)
    assert not predict_next(lib, [0.5, 0.5], 4).extrapolated
    assert predict_next(lib, [50.0, 50.0], 4).extrapolated


def two_branch_library(jitter=0.01, seed=0):
    rng = np.random.default_rng(seed)
    angles = np.arange(10) * 2 * np.pi / 10
    pts = np.c_[np.cos(angles), np.sin(angles)]
    disp = np.array([[1.0, 0.0]] * 5 + [[-1.0, 0.0]] * 5) + rng.normal(scale=jitter, size=(10, 2))
    return library(pts, disp)


def test_two_modes_equal_weight():
    modes = predict_multi(two_branch_library(), [0.0, 0.0], 10, gap_factor=3)
    assert len(modes) == 2
    assert [round(m.weight, 2) for m in modes] == [0.5, 0.5]
    assert sorted(np.sign(m.mean[0]) for m in modes) == [-1, 1]
    assert sorted(np.concatenate([m.members for m in modes]).tolist()) == list(range(10))


def test_identical_displacements_give_one_mode():
    pts = np.random.default_rng(0).normal(size=(40, 2))
    modes = predict_multi(library(pts, np.ones((40, 2))), [0.0, 0.0], 8)
    assert len(modes) == 1 and modes[0].weight == 1.0


def test_kn_one_multi_matches_single():
    lib = two_branch_library()
    one = predict_multi(lib, [0.3, 0.2], 1)
    p = predict_next(lib, [0.3, 0.2], 1)
    assert len(one) == 1
    assert np.array_equal(one[0].mean, p.mean)


@settings(max_examples=100)
@given(arrays(np.float64, (40, 2), elements=st.floats(-3, 3)), st.integers(1, 40), st.floats(1.01, 10))
def test_modes_partition_neighbors(disp, kn, gap):
    pts = np.random.default_rng(0).normal(size=(40, 2))
    lib = library(pts, disp)
    modes = predict_multi(lib, [0.0, 0.0], kn, gap)
    assert abs(sum(m.weight for m in modes) - 1) <= 1e-9
    members = np.concatenate([m.members for m in modes])
    assert sorted(members.tolist()) == sorted(query_knn(lib, [0.0, 0.0], kn).indices.tolist())
    keys = [(-m.weight, m.members.min()) for m in modes]
    assert keys == sorted(keys)


def test_single_linkage_chains():
    v = np.array([[0.0], [1.0], [2.0], [10.0]])
    groups = single_linkage(v, 3.0)
    assert [g.tolist() for g in groups] == [[0, 1, 2], [3]]


def test_by_label_modes():
    pts = np.r_[np.zeros((5, 1)), np.ones((5, 1))]
    lib = TransitionLibrary(1, 1, pts, np.r_[np.ones((5, 1)), -np.ones((5, 1))], np.arange(10), [0] * 5 + [1] * 5)
    modes = predict_multi(lib, [0.2], 3, by_label=True)
    assert sorted(m.label for m in modes) == [0, 1]
    assert modes[0].label == 0 and modes[0].weight > modes[1].weight


def mode(mean, weight):
    return Prediction(np.asarray(mean, dtype=float), np.zeros(len(mean)), weight, np.array([0]))


def test_correction_vector_examples():
    ps = PredictionSet((mode([1, 0], 0.5), mode([-1, 0], 0.5)))
    best, res = correction_vector(ps, [0.6, 0.2])
    assert best == 0 and np.allclose(res, [-0.4, 0.2])
    assert correction_vector(ps, [1, 0])[1].tolist() == [0, 0]
    assert correction_vector(ps, [0, 5])[0] == 0


@given(arrays(np.float64, (2,), elements=st.floats(-10, 10)))
def test_correction_vector_is_argmin(actual):
    ps = PredictionSet((mode([1, 0], 0.4), mode([-1, 0], 0.3), mode([0, 2], 0.3)))
    best, res = correction_vector(ps, actual)
    for m in ps.modes:
        assert np.linalg.norm(res) <= np.linalg.norm(actual - m.mean) + 1e-12


def test_prediction_set_weight_check():
    with pytest.raises(ValueError):
        PredictionSet((mode([0], 0.4), mode([1], 0.4)))


def test_tracker_arithmetic():
    s = RegimeTrackerState(0.5, ((0, 1.0), (1, 0.0)))
    for _ in range(3):
        s = track_regimes(s, 1)
    assert s.credit(0) == 0.125 and s.credit(1) == 0.875
    assert s.current == 1


def test_tracker_converges_monotonically():
    s = RegimeTrackerState(0.1)
    last = -1.0
    for _ in range(200):
        s = track_regimes(s, 4)
        assert s.credit(4) > last or s.credit(4) == 1.0
        last = s.credit(4)
    assert last == pytest.approx(1.0, abs=1e-8)


@given(st.floats(0.001, 0.999), st.lists(st.integers(0, 5), max_size=200))
def test_tracker_credits_bounded(decay, seq):
    s = RegimeTrackerState(decay)
    for r in seq:
        s = track_regimes(s, r)
        assert all(0.0 <= c <= 1.0 for _, c in s.credits)


def test_tracker_tie_goes_to_lowest_id():
    assert RegimeTrackerState(0.1, ((3, 0.5), (1, 0.5))).current == 1
    with pytest.raises(InvalidParameterError):
        RegimeTrackerState(1.0)
