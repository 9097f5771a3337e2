import numpy as np
import pytest

from mbesbench.core import (PointCloud, RigidTransform, apply_transform, inverse,
                            transform_from_euler_z)
from mbesbench.features import FeatureSet
from mbesbench.metrics import rre, rte
from mbesbench.registration import (CorrespondenceSet, RegistrationError, gicp,
                                    kabsch_fit, match_features, ransac_registration,
                                    read_results, write_results)
from mbesbench.terrain import TerrainConfig, generate_terrain_pings
from mbesbench.ingest import build_submaps
from mbesbench.pairgen import crop_halfplane

from conftest import random_cloud, random_rotation, random_transform


class TestMatchFeatures:
    def test_identical_sets_identity_matching(self, rng):
        d = rng.random((20, 33))
        fs = FeatureSet(d, np.arange(20))
        corr = match_features(fs, fs)
        np.testing.assert_array_equal(corr.src_indices, np.arange(20))
        np.testing.assert_array_equal(corr.ref_indices, np.arange(20))
        np.testing.assert_array_equal(corr.distances, np.zeros(20))

    def test_single_src_argmin(self, rng):
        src = FeatureSet(rng.random((1, 8)), np.arange(1))
        ref = FeatureSet(rng.random((40, 8)), np.arange(40))
        corr = match_features(src, ref)
        d = np.linalg.norm(ref.descriptors - src.descriptors[0], axis=1)
        assert corr.ref_indices[0] == np.argmin(d)
        assert corr.distances[0] == pytest.approx(d.min())

    def test_matches_brute_force_table(self, rng):
        # oracle: full distance table, row-wise argmin
        for _ in range(20):
            a = rng.random((50, 33))
            b = rng.random((50, 33))
            corr = match_features(FeatureSet(a, np.arange(50)),
                                  FeatureSet(b, np.arange(50)))
            table = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
            np.testing.assert_array_equal(corr.ref_indices, np.argmin(table, axis=1))

    def test_mutual_filter(self, rng):
        a = rng.random((30, 8))
        b = rng.random((30, 8))
        corr = match_features(FeatureSet(a, np.arange(30)), FeatureSet(b, np.arange(30)),
                              mutual=True)
        table = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
        fwd = np.argmin(table, axis=1)
        bwd = np.argmin(table, axis=0)
        expected = [i for i in range(30) if bwd[fwd[i]] == i]
        np.testing.assert_array_equal(corr.src_indices, expected)

    def test_point_index_mapping(self, rng):
        src = FeatureSet(rng.random((3, 4)), np.array([10, 20, 30]))
        ref = FeatureSet(src.descriptors.copy(), np.array([7, 8, 9]))
        corr = match_features(src, ref)
        np.testing.assert_array_equal(corr.src_indices, [10, 20, 30])
        np.testing.assert_array_equal(corr.ref_indices, [7, 8, 9])

    def test_errors(self, rng):
        good = FeatureSet(rng.random((4, 8)), np.arange(4))
        with pytest.raises(ValueError, match="empty"):
            match_features(FeatureSet(np.zeros((0, 8)), np.zeros(0)), good)
        with pytest.raises(ValueError, match="dimension"):
            match_features(good, FeatureSet(rng.random((4, 9)), np.arange(4)))


class TestKabsch:
    def test_identity_on_equal_inputs(self, rng):
        pts = rng.uniform(-5, 5, (20, 3))
        t = kabsch_fit(pts, pts)
        assert np.abs(t.rotation - np.eye(3)).max() < 1e-12
        assert np.abs(t.translation).max() < 1e-12

    def test_recovers_known_transform(self, rng):
        # exact-correspondence fits recover the matrix to ~1 ulp; the angle
        # assertion uses the skew part, accurate for tiny angles where the
        # arccos-of-trace formula bottoms out near sqrt(eps) degrees
        for _ in range(20):
            t = random_transform(rng)
            src = rng.uniform(-10, 10, (15, 3))
            ref = src @ t.rotation.T + t.translation
            fit = kabsch_fit(src, ref)
            rel = t.rotation.T @ fit.rotation
            small_angle = np.degrees(np.linalg.norm(
                [rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]]) / 2)
            assert small_angle < 1e-7
            assert np.abs(fit.rotation - t.rotation).max() < 1e-9
            assert rte(t, fit) < 1e-9

    def test_mirrored_set_stays_proper(self, rng):
        src = rng.uniform(-5, 5, (30, 3))
        mirrored = src * np.array([-1.0, 1.0, 1.0])
        fit = kabsch_fit(src, mirrored)
        assert np.linalg.det(fit.rotation) == pytest.approx(1.0, abs=1e-9)

    def test_degenerate_inputs(self, rng):
        line = np.arange(5)[:, None] * np.array([1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="rank deficient"):
            kabsch_fit(line, line + 1.0)
        same = np.tile([1.0, 2.0, 3.0], (4, 1))
        with pytest.raises(ValueError, match="rank deficient"):
            kabsch_fit(same, same)
        with pytest.raises(ValueError, match="at least 3"):
            kabsch_fit(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_global_optimum_against_perturbations(self, rng):
        src = rng.uniform(-5, 5, (25, 3))
        t = random_transform(rng)
        ref = src @ t.rotation.T + t.translation + rng.normal(0, 0.1, (25, 3))
        fit = kabsch_fit(src, ref)

        def sse(tf):
            d = src @ tf.rotation.T + tf.translation - ref
            return float((d * d).sum())

        best = sse(fit)
        for _ in range(1000):
            w = rng.normal(0, 0.01, 3)
            angle = np.linalg.norm(w)
            k = w / angle
            kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
            dr = np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * kx @ kx
            perturbed = RigidTransform(dr @ fit.rotation,
                                       dr @ fit.translation + rng.normal(0, 0.01, 3))
            assert sse(perturbed) >= best - 1e-9


def exact_correspondences(rng, n, t):
    src = rng.uniform(-50, 50, (n, 3))
    ref = src @ t.rotation.T + t.translation
    return (PointCloud(src), PointCloud(ref),
            CorrespondenceSet(np.arange(n), np.arange(n), np.zeros(n)))


class TestRansac:
    def test_all_inliers_recovers_transform(self, rng):
        t = random_transform(rng)
        src, ref, corr = exact_correspondences(rng, 200, t)
        res = ransac_registration(src, ref, corr, iters=2000, seed=3)
        assert res.converged
        assert rre(t, res.transform) < 1e-6
        assert rte(t, res.transform) < 1e-6

    def test_majority_outliers_monte_carlo(self, rng):
        # 70% of correspondences rewired to random partners; the known
        # transform must still be recovered in >= 99/100 seeded runs
        hits = 0
        runs = 100
        for run in range(runs):
            t = random_transform(rng, t_scale=20.0)
            src_pts = rng.uniform(-50, 50, (1000, 3))
            ref_pts = src_pts @ t.rotation.T + t.translation
            ref_idx = np.arange(1000)
            bad = rng.choice(1000, size=700, replace=False)
            ref_idx[bad] = rng.integers(0, 1000, size=700)
            corr = CorrespondenceSet(np.arange(1000), ref_idx, np.zeros(1000))
            res = ransac_registration(PointCloud(src_pts), PointCloud(ref_pts), corr,
                                      iters=2000, inlier_thresh=2.0, seed=run)
            if res.converged and rte(t, res.transform) < 0.5:
                hits += 1
        assert hits >= 99

    def test_deterministic(self, rng):
        t = random_transform(rng)
        src, ref, corr = exact_correspondences(rng, 100, t)
        a = ransac_registration(src, ref, corr, iters=500, seed=11)
        b = ransac_registration(src, ref, corr, iters=500, seed=11)
        np.testing.assert_array_equal(a.transform.rotation, b.transform.rotation)
        np.testing.assert_array_equal(a.transform.translation, b.transform.translation)
        assert a.inlier_count == b.inlier_count

    def test_too_few_correspondences(self, rng):
        src, ref, _ = exact_correspondences(rng, 10, random_transform(rng))
        corr = CorrespondenceSet([0, 1], [0, 1], [0.0, 0.0])
        with pytest.raises(RegistrationError, match="too few correspondences"):
            ransac_registration(src, ref, corr, sample_size=3)

    def test_no_consensus_not_converged(self, rng):
        # pure-noise correspondences cannot reach the 5% inlier bar
        src = PointCloud(rng.uniform(-100, 100, (200, 3)))
        ref = PointCloud(rng.uniform(5000, 5200, (200, 3)))
        corr = CorrespondenceSet(np.arange(200), rng.permutation(200), np.zeros(200))
        res = ransac_registration(src, ref, corr, iters=200, inlier_thresh=0.01, seed=0)
        assert not res.converged

    def test_sample_size_four(self, rng):
        t = random_transform(rng)
        src, ref, corr = exact_correspondences(rng, 100, t)
        res = ransac_registration(src, ref, corr, iters=500, sample_size=4, seed=5)
        assert res.converged and rte(t, res.transform) < 1e-6


def terrain_cloud(seed=3, n_pings=160):
    cfg = TerrainConfig(seed=seed, components=((80.0, 4.0),), roughness_sigma=0.15)
    tensor = generate_terrain_pings(cfg, n_pings, 24, swath_width=70.0,
                                    along_track_step=1.5)
    return build_submaps(tensor, n_pings, 1)[0].cloud


class TestGicp:
    def test_already_aligned(self, rng):
        c = random_cloud(rng, 300, scale=30.0)
        res = gicp(c, c)
        assert res.converged
        assert res.iterations <= 2
        assert rre(RigidTransform.identity(), res.transform) < 1e-6
        assert rte(RigidTransform.identity(), res.transform) < 1e-6

    def test_recovers_known_transform_on_terrain(self):
        ref = terrain_cloud()
        t = transform_from_euler_z(5.0, (10.0, 10.0, 1.0))
        src = apply_transform(crop_halfplane(ref, 0.8, seed=2), inverse(t))
        res = gicp(src, ref)
        assert res.converged
        assert rre(t, res.transform) < 0.5
        assert rte(t, res.transform) < 0.5

    def test_disjoint_clouds_fail(self, rng):
        a = random_cloud(rng, 50, scale=10.0)
        b = PointCloud(a.points + np.array([10000.0, 0.0, 0.0]))
        res = gicp(a, b, max_corr_dist=50.0)
        assert not res.converged
        assert res.transform is None

    def test_objective_monotone_per_accepted_step(self):
        ref = terrain_cloud(seed=9)
        t = transform_from_euler_z(3.0, (8.0, -6.0, 0.5))
        src = apply_transform(crop_halfplane(ref, 0.8, seed=5), inverse(t))
        log = []
        gicp(src, ref, objective_log=log)
        assert log
        for before, after, n_corr in log:
            assert after <= before + 1e-9
            assert n_corr >= 10

    def test_returned_transform_valid(self):
        ref = terrain_cloud(seed=5)
        src = apply_transform(ref, inverse(transform_from_euler_z(2.0, (5, 5, 0))))
        res = gicp(src, ref)
        r = res.transform.rotation
        assert np.abs(r.T @ r - np.eye(3)).max() < 1e-9
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)

    def test_too_few_points(self, rng):
        tiny = random_cloud(rng, 5)
        with pytest.raises(ValueError, match="at least 10"):
            gicp(tiny, tiny)


class TestResultsFile:
    def test_round_trip(self, rng, tmp_path):
        t = random_transform(rng)
        rows = [
            ("00001_00001", None),
            ("00002_00003",
             __import__("mbesbench").registration.RegistrationResult(t, True, 5)),
        ]
        path = tmp_path / "results.jsonl"
        write_results(rows, path)
        table = read_results(path)
        assert table["00001_00001"] == (False, None)
        success, tf = table["00002_00003"]
        assert success
        assert np.abs(tf.rotation - t.rotation).max() < 1e-12
        np.testing.assert_allclose(tf.translation, t.translation)

    def test_schema(self, rng, tmp_path):
        import json
        t = random_transform(rng)
        from mbesbench.registration import RegistrationResult
        path = tmp_path / "results.jsonl"
        write_results([("a", RegistrationResult(t, True, 1))], path)
        doc = json.loads(path.read_text().splitlines()[0])
        assert set(doc) == {"pair_id", "success", "R", "t"}
        assert len(doc["R"]) == 9 and len(doc["t"]) == 3
