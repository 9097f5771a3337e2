import numpy as np
import pytest

from mbesbench.core import PointCloud, apply_transform, transform_from_euler_z
from mbesbench.ingest import build_submaps, split_dataset
from mbesbench.metrics import consistency_error
from mbesbench.pairgen import (PairSpec, _crop_along, crop_halfplane, enumerate_pairs,
                               gt_for_spec, make_pair, read_pair_manifest,
                               sample_pair_transform, write_pair_manifest)
from mbesbench.seeds import derive_seed
from mbesbench.terrain import TerrainConfig, generate_terrain_pings

from conftest import random_cloud


def terrain_submaps(seed=7, n_pings=220, sigma=0.2):
    cfg = TerrainConfig(seed=seed, components=((100.0, 5.0),), roughness_sigma=sigma)
    t = generate_terrain_pings(cfg, n_pings, 16, swath_width=60.0, along_track_step=2.0)
    return build_submaps(t, 100, 20)


class TestCropHalfplane:
    def test_retain_one_is_identity(self, rng):
        c = random_cloud(rng, 50)
        assert crop_halfplane(c, 1.0, seed=3) is c

    def test_collinear_points_top_seven(self, rng):
        # 10 points along the crop direction itself: keep the 7 furthest
        theta = np.random.default_rng(5).uniform(0, 2 * np.pi)
        d = np.array([np.cos(theta), np.sin(theta), 0.0])
        c = PointCloud(np.arange(10)[:, None] * d)
        out = crop_halfplane(c, 0.7, seed=5)
        np.testing.assert_allclose(out.points, np.arange(3, 10)[:, None] * d)

    def test_uniform_grid_exact_count(self):
        xs, ys = np.meshgrid(np.arange(100.0), np.arange(100.0))
        c = PointCloud(np.column_stack([xs.ravel(), ys.ravel(), np.zeros(10000)]))
        for seed in (0, 1, 2, 99):
            assert len(crop_halfplane(c, 0.7, seed)) == 7000

    @pytest.mark.parametrize("n,retain", [(1, 0.5), (10, 0.7), (10, 0.05),
                                          (997, 0.7), (1000, 0.999)])
    def test_ceil_rule(self, rng, n, retain):
        c = random_cloud(rng, n)
        assert len(crop_halfplane(c, retain, seed=1)) == int(np.ceil(retain * n))

    def test_z_untouched_and_subset(self, rng):
        c = random_cloud(rng, 200)
        out = crop_halfplane(c, 0.7, seed=8)
        rows = {tuple(p) for p in c.points.tolist()}
        assert all(tuple(p) in rows for p in out.points.tolist())

    def test_commutes_with_z_rotation(self, rng):
        pts = rng.uniform(-10, 10, (150, 3))
        d = np.array([np.cos(0.7), np.sin(0.7), 0.0])
        t = transform_from_euler_z(25.0, (0, 0, 0))
        keep_orig = _crop_along(pts, d, 0.7)
        keep_rot = _crop_along(pts @ t.rotation.T, t.rotation @ d, 0.7)
        np.testing.assert_array_equal(keep_orig, keep_rot)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            crop_halfplane(PointCloud(np.zeros((0, 3))), 0.7, 0)
        with pytest.raises(ValueError, match="retain"):
            crop_halfplane(PointCloud([[0, 0, 0]]), 0.0, 0)


class TestSamplePairTransform:
    def test_collapsed_ranges_identity(self):
        t = sample_pair_transform(0, (0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
        np.testing.assert_array_equal(t.rotation, np.eye(3))
        np.testing.assert_array_equal(t.translation, np.zeros(3))

    def test_deterministic(self):
        a = sample_pair_transform(77)
        b = sample_pair_transform(77)
        np.testing.assert_array_equal(a.rotation, b.rotation)
        np.testing.assert_array_equal(a.translation, b.translation)

    def test_monte_carlo_ranges(self):
        yaws, txs, tys, tzs = [], [], [], []
        for seed in range(10000):
            t = sample_pair_transform(seed)
            yaws.append(np.degrees(np.arctan2(t.rotation[1, 0], t.rotation[0, 0])))
            txs.append(t.translation[0])
            tys.append(t.translation[1])
            tzs.append(t.translation[2])
        assert 0.0 <= min(yaws) and max(yaws) <= 10.0
        assert min(txs) >= -40 and max(txs) <= 40
        # draws should reach within 1% of the range ends
        assert min(txs) < -39.6 and max(txs) > 39.6
        assert min(tys) < -39.6 and max(tys) > 39.6
        assert -2 <= min(tzs) and max(tzs) <= 2

    def test_rejects_bad_range(self):
        with pytest.raises(ValueError):
            sample_pair_transform(0, yaw_range=(10.0, 0.0))


class TestMakePair:
    def test_degenerate_config_identity(self, rng):
        subs = terrain_submaps()
        spec = PairSpec(0, 0, 1.0, 0.49, seed=5)
        rec = make_pair(subs[0], subs[0], spec, retain=1.0,
                        yaw_range=(0, 0), xy_range=(0, 0), z_range=(0, 0))
        np.testing.assert_array_equal(rec.gt_transform.rotation, np.eye(3))
        np.testing.assert_array_equal(rec.ref_cloud.points, rec.src_cloud.points)

    def test_deterministic_rebuild(self):
        subs = terrain_submaps()
        spec = PairSpec(1, 2, 0.8, 0.8 * 0.49, seed=123)
        a = make_pair(subs[1], subs[2], spec)
        b = make_pair(subs[1], subs[2], spec)
        np.testing.assert_array_equal(a.ref_cloud.points, b.ref_cloud.points)
        np.testing.assert_array_equal(a.src_cloud.points, b.src_cloud.points)
        np.testing.assert_array_equal(a.gt_transform.rotation, b.gt_transform.rotation)

    def test_gt_maps_src_back_onto_crop(self):
        # consistency under gt equals consistency of the un-moved crops under
        # identity: moving by inverse(gt) then scoring at gt is a round trip
        subs = terrain_submaps()
        spec = PairSpec(0, 1, 0.8, 0.8 * 0.49, seed=9)
        rec = make_pair(subs[0], subs[1], spec)
        moved_back = apply_transform(rec.src_cloud, rec.gt_transform)
        c_pair, o_pair = consistency_error(rec.ref_cloud, rec.src_cloud, rec.gt_transform)
        ident = np.eye(3)
        from mbesbench.core import RigidTransform
        c_base, o_base = consistency_error(rec.ref_cloud, moved_back,
                                           RigidTransform(ident, np.zeros(3)))
        assert abs(c_pair - c_base) < 1e-9
        assert abs(o_pair - o_base) < 1e-9

    def test_gt_within_sampling_ranges(self):
        subs = terrain_submaps()
        for seed in range(20):
            spec = PairSpec(0, 0, 1.0, 0.49, seed=seed)
            rec = make_pair(subs[0], subs[0], spec)
            t = rec.gt_transform
            yaw = np.degrees(np.arctan2(t.rotation[1, 0], t.rotation[0, 0]))
            assert 0.0 <= yaw <= 10.0
            assert np.abs(t.translation[:2]).max() <= 40.0
            assert abs(t.translation[2]) <= 2.0

    def test_noise_knob(self):
        subs = terrain_submaps()
        spec = PairSpec(0, 0, 1.0, 0.49, seed=4)
        clean = make_pair(subs[0], subs[0], spec)
        noisy = make_pair(subs[0], subs[0], spec, noise_sigma=0.5)
        assert len(clean.ref_cloud) == len(noisy.ref_cloud)
        rms = np.sqrt(np.mean((clean.ref_cloud.points - noisy.ref_cloud.points) ** 2))
        assert 0.3 < rms < 0.7

    def test_effective_overlap_statistics(self):
        # two independent 70% crops keep ~49% of a uniform cloud in both
        xs, ys = np.meshgrid(np.arange(60.0), np.arange(60.0))
        pts = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(3600)])
        fracs = []
        for seed in range(60):
            a = crop_halfplane(PointCloud(pts), 0.7, derive_seed(seed, "a"))
            b = crop_halfplane(PointCloud(pts), 0.7, derive_seed(seed, "b"))
            sa = {tuple(p) for p in a.points.tolist()}
            sb = {tuple(p) for p in b.points.tolist()}
            fracs.append(len(sa & sb) / 3600)
        assert 0.42 <= np.mean(fracs) <= 0.56


class TestEnumeratePairs:
    def manifest(self, n_submaps=6):
        subs = terrain_submaps(n_pings=100 + 20 * (n_submaps - 1))
        assert len(subs) == n_submaps
        return split_dataset(subs, {"all": (0, 10000)})[0]

    def test_self_pairs_full_overlap(self):
        specs = enumerate_pairs(self.manifest(), [1.0], 1)
        assert len(specs) == 6
        assert all(s.ref_submap_id == s.src_submap_id for s in specs)

    def test_eighty_percent(self):
        specs = enumerate_pairs(self.manifest(), [0.8], 1)
        assert len(specs) == 5
        assert all(s.src_submap_id == s.ref_submap_id + 1 for s in specs)

    def test_all_overlaps_count(self):
        # oracle: nested loop over (i, k) with partner-existence check
        specs = enumerate_pairs(self.manifest(), [1.0, 0.8, 0.6, 0.4, 0.2], 1)
        expected = sum(1 for i in range(6) for k in range(5) if i + k < 6)
        assert len(specs) == expected == 20

    def test_effective_overlap_factor(self):
        specs = enumerate_pairs(self.manifest(), [0.4], 1)
        assert all(s.effective_overlap == pytest.approx(0.4 * 0.49) for s in specs)
        assert all(s.overlap_bin_pct == 20 for s in specs)

    def test_seed_depends_on_pair(self):
        specs = enumerate_pairs(self.manifest(), [1.0, 0.8], 1)
        assert len({s.seed for s in specs}) == len(specs)

    def test_nominal_validation(self):
        with pytest.raises(ValueError, match="nominal"):
            PairSpec(0, 1, 0.5, 0.245, seed=1)


class TestPairManifestIO:
    def test_round_trip(self, tmp_path):
        m = TestEnumeratePairs().manifest()
        specs = enumerate_pairs(m, [1.0, 0.6], 7)
        pairs = [(s, gt_for_spec(s)) for s in specs]
        path = tmp_path / "pairs.jsonl"
        write_pair_manifest(pairs, path)
        back = read_pair_manifest(path)
        assert len(back) == len(pairs)
        for (s0, g0), (s1, g1) in zip(pairs, back):
            assert s0 == s1
            np.testing.assert_array_equal(g0.rotation, g1.rotation)
            np.testing.assert_array_equal(g0.translation, g1.translation)

    def test_schema(self, tmp_path):
        import json
        m = TestEnumeratePairs().manifest()
        specs = enumerate_pairs(m, [1.0], 7)[:1]
        path = tmp_path / "pairs.jsonl"
        write_pair_manifest([(specs[0], gt_for_spec(specs[0]))], path)
        doc = json.loads(path.read_text().splitlines()[0])
        assert set(doc) == {"pair_id", "ref_id", "src_id", "nominal_overlap",
                            "effective_overlap", "seed", "gt"}
        assert len(doc["gt"]["R"]) == 9 and len(doc["gt"]["t"]) == 3
