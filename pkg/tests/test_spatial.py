import numpy as np
import pytest

from mbesbench.core import PointCloud
from mbesbench.spatial import build_index, knn, radius_search

from conftest import random_cloud


def brute_knn(points, q, k):
    """Naive scan: sort by (distance, index), take k."""
    d = np.linalg.norm(points - q, axis=1)
    order = np.lexsort((np.arange(len(points)), d))[:k]
    return [(int(i), float(d[i])) for i in order]


def brute_radius(points, q, r):
    d = np.linalg.norm(points - q, axis=1)
    idx = np.flatnonzero(d <= r)
    order = np.lexsort((idx, d[idx]))
    return [(int(idx[i]), float(d[idx[i]])) for i in order]


def test_empty_cloud_rejected():
    with pytest.raises(ValueError, match="empty input"):
        build_index(PointCloud(np.zeros((0, 3))))


def test_single_point_cloud():
    idx = build_index(PointCloud([[1.0, 2.0, 3.0]]))
    assert knn(idx, [0, 0, 0], 1) == [(0, pytest.approx(np.sqrt(14)))]
    assert knn(idx, [0, 0, 0], 5) == [(0, pytest.approx(np.sqrt(14)))]


def test_query_on_stored_point_gives_zero_distance(rng):
    c = random_cloud(rng, 50)
    idx = build_index(c)
    first = knn(idx, c.points[17], 3)[0]
    assert first == (17, 0.0)


def test_k_equals_n_sorted(rng):
    c = random_cloud(rng, 20)
    idx = build_index(c)
    res = knn(idx, [0.0, 0.0, 0.0], 20)
    assert len(res) == 20
    dists = [d for _, d in res]
    assert dists == sorted(dists)


def test_duplicate_points_both_returned():
    c = PointCloud([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [5.0, 5.0, 5.0]])
    res = knn(build_index(c), [1.0, 1.0, 1.0], 2)
    assert [i for i, _ in res] == [0, 1]


def test_k_below_one_rejected(rng):
    idx = build_index(random_cloud(rng, 5))
    with pytest.raises(ValueError):
        knn(idx, [0, 0, 0], 0)


def test_knn_matches_brute_force(rng):
    # oracle equivalence over many random instances, exact including ties
    for _ in range(100):
        n = int(rng.integers(1, 60))
        pts = np.round(rng.uniform(-5, 5, (n, 3)), 1)  # rounding makes ties likely
        idx = build_index(PointCloud(pts))
        for _ in range(5):
            q = np.round(rng.uniform(-5, 5, 3), 1)
            k = int(rng.integers(1, n + 2))
            assert knn(idx, q, k) == brute_knn(pts, q, k)


def test_radius_matches_brute_force(rng):
    for _ in range(100):
        n = int(rng.integers(1, 60))
        pts = np.round(rng.uniform(-5, 5, (n, 3)), 1)
        idx = build_index(PointCloud(pts))
        for _ in range(5):
            q = np.round(rng.uniform(-5, 5, 3), 1)
            r = float(rng.uniform(0.1, 8.0))
            assert radius_search(idx, q, r) == brute_radius(pts, q, r)


def test_radius_tiny_and_huge(rng):
    c = random_cloud(rng, 30, scale=10.0)
    idx = build_index(c)
    assert radius_search(idx, [1000.0, 0, 0], 1e-6) == []
    assert len(radius_search(idx, [0.0, 0, 0], 1e6)) == 30
    on_point = radius_search(idx, c.points[3], 1e-9)
    assert on_point == [(3, 0.0)]


def test_radius_monotone_in_r(rng):
    c = random_cloud(rng, 200, scale=10.0)
    idx = build_index(c)
    q = [0.0, 0.0, 0.0]
    sizes = [len(radius_search(idx, q, r)) for r in np.linspace(0.5, 25, 12)]
    assert sizes == sorted(sizes)


def test_rejects_nonpositive_radius(rng):
    idx = build_index(random_cloud(rng, 5))
    with pytest.raises(ValueError):
        radius_search(idx, [0, 0, 0], 0.0)


def test_batch_helpers_match_single_queries(rng):
    c = random_cloud(rng, 80)
    idx = build_index(c)
    queries = rng.uniform(-50, 50, (10, 3))
    d, i = idx.knn_batch(queries, 4)
    for row, q in enumerate(queries):
        expected = brute_knn(c.points, q, 4)
        assert sorted(i[row].tolist()) == sorted(j for j, _ in expected)
        np.testing.assert_allclose(np.sort(d[row]), [dd for _, dd in expected], rtol=1e-12)
    dist, near = idx.nearest_within(queries, 5.0)
    for row, q in enumerate(queries):
        b = brute_knn(c.points, q, 1)[0]
        if b[1] <= 5.0:
            assert near[row] == b[0]
        else:
            assert near[row] == -1
