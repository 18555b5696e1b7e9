"""CFAR against the per-cell oracle, DBSCAN against the brute-force reference,
and measurement extraction from synthesized frames."""

import numpy as np
import pytest

from oracles import cfar_reference, dbscan_reference, partition_of

from radarblock.detect import (
    CfarConfig,
    Cluster,
    Detection,
    ObjectMeasurement,
    cfar_2d,
    cfar_alpha,
    cluster_detections,
    dbscan,
    extract_measurement,
)
from radarblock.dsp import FftConfig, radar_cube, range_velocity_map
from radarblock.sim import RadarConfig, SceneObject, synth_frame


class TestCfarConfig:
    def test_requires_train_wider_than_guard(self):
        with pytest.raises(ValueError, match="train"):
            CfarConfig(train=(2, 2), guard=(2, 1))

    def test_alpha_positive(self):
        with pytest.raises(ValueError, match="alpha"):
            CfarConfig(alpha=-1.0)

    def test_default_alpha_matches_textbook_relation(self):
        cfg = CfarConfig(train=(8, 4), guard=(2, 1), p_fa=1e-3)
        n = 21 * 11 - 5 * 3
        assert cfg.resolved_alpha == pytest.approx(n * (1e-3 ** (-1 / n) - 1))


class TestCfar2d:
    def test_constant_map_no_detections(self):
        m = np.full((32, 32), 3.7)
        binary, dets = cfar_2d(m, CfarConfig(train=(3, 3), guard=(1, 1), alpha=1.5))
        assert not binary.any()
        assert dets == []

    def test_single_spike_detected_alone(self):
        m = np.zeros((32, 32))
        m[16, 10] = 100.0
        cfg = CfarConfig(train=(3, 3), guard=(1, 1), alpha=5.0)
        binary, dets = cfar_2d(m, cfg)
        assert [(d.range_bin, d.velocity_bin) for d in dets] == [(16, 10)]
        assert dets[0].magnitude == 100.0
        assert np.array_equal(binary, cfar_reference(m, cfg.train, cfg.guard, 5.0))

    def test_window_too_large(self):
        with pytest.raises(ValueError, match="too small"):
            cfar_2d(np.zeros((10, 10)), CfarConfig(train=(4, 4), guard=(1, 1)))

    def test_matches_reference_on_random_maps(self):
        rng = np.random.default_rng(17)
        configs = [
            CfarConfig(train=(3, 2), guard=(1, 1)),
            CfarConfig(train=(2, 2), guard=(0, 0)),
            CfarConfig(train=(5, 3), guard=(2, 1), alpha=4.0),
        ]
        for cfg in configs:
            for _ in range(4):
                shape = (rng.integers(20, 64), rng.integers(20, 64))
                m = rng.exponential(1.0, size=shape)
                binary, _ = cfar_2d(m, cfg)
                ref = cfar_reference(m, cfg.train, cfg.guard, cfg.resolved_alpha)
                assert np.array_equal(binary, ref)

    def test_detection_order_is_row_major(self):
        m = np.zeros((40, 40))
        m[30, 5] = 50.0
        m[10, 20] = 50.0
        _, dets = cfar_2d(m, CfarConfig(train=(3, 3), guard=(1, 1), alpha=5.0))
        cells = [(d.range_bin, d.velocity_bin) for d in dets]
        assert cells == sorted(cells)

    def test_empirical_false_alarm_rate(self):
        # exponential-power noise, alpha from the design relation
        rng = np.random.default_rng(8)
        cfg = CfarConfig(train=(8, 4), guard=(2, 1), p_fa=1e-3)
        cells = 0
        alarms = 0
        for _ in range(4):
            m = rng.exponential(1.0, size=(256, 128))
            binary, _ = cfar_2d(m, cfg)
            cells += m.size
            alarms += binary.sum()
        assert cells >= 1e5
        rate = alarms / cells
        assert 0.5e-3 <= rate <= 2e-3


class TestDbscan:
    def test_two_separated_groups(self):
        rng = np.random.default_rng(0)
        a = rng.normal((0, 0), 0.3, size=(5, 2))
        b = rng.normal((50, 50), 0.3, size=(5, 2))
        labels = dbscan(np.vstack([a, b]), eps=2.0, min_pts=3)
        assert set(labels[:5]) == {0}
        assert set(labels[5:]) == {1}

    def test_isolated_point_is_noise(self):
        labels = dbscan(np.array([[5.0, 5.0]]), eps=1.0, min_pts=2)
        assert labels.tolist() == [-1]

    def test_empty_input(self):
        assert dbscan(np.empty((0, 2)), eps=1.0, min_pts=2).size == 0

    def test_parameter_validation(self):
        with pytest.raises(ValueError, match="eps"):
            dbscan(np.zeros((3, 2)), eps=0.0, min_pts=2)
        with pytest.raises(ValueError, match="min_pts"):
            dbscan(np.zeros((3, 2)), eps=1.0, min_pts=0)

    def test_matches_reference_on_random_instances(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(5, 120))
            pts = rng.uniform(0, 40, size=(n, 2)).round(1)
            labels = dbscan(pts, eps=3.0, min_pts=4)
            ref = dbscan_reference(pts, eps=3.0, min_pts=4)
            assert np.array_equal(labels, ref)

    def test_partition_independent_of_order(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(0, 20, size=(60, 2))
        labels = dbscan(pts, eps=2.5, min_pts=3)
        perm = rng.permutation(len(pts))
        labels_perm = dbscan(pts[perm], eps=2.5, min_pts=3)
        assert partition_of(pts, labels) == partition_of(pts[perm], labels_perm)

    def test_scale_factors_change_neighborhoods(self):
        pts = np.array([[0.0, 0.0], [0.0, 4.0], [0.0, 8.0]])
        # unscaled: chain is connected at eps=4.5
        assert set(dbscan(pts, eps=4.5, min_pts=2)) == {0}
        # squashing the second axis to half its size keeps them connected
        assert set(dbscan(pts, eps=4.5, min_pts=2, scale=(1.0, 0.5))) == {0}
        # stretching it breaks the chain apart
        assert set(dbscan(pts, eps=4.5, min_pts=2, scale=(1.0, 2.0))) == {-1}


class TestClusterTypes:
    def test_cluster_must_be_nonempty(self):
        with pytest.raises(ValueError, match="non-empty"):
            Cluster(cluster_id=0, detections=[])

    def test_cluster_members_unique(self):
        d = Detection(range_bin=1, velocity_bin=2, magnitude=3.0)
        with pytest.raises(ValueError, match="unique"):
            Cluster(cluster_id=0, detections=[d, d])

    def test_measurement_invariants(self):
        with pytest.raises(ValueError, match="range"):
            ObjectMeasurement(rho=-1.0, v=0.0, theta=0.0)
        with pytest.raises(ValueError, match="angle"):
            ObjectMeasurement(rho=1.0, v=0.0, theta=2.0)

    def test_cluster_detections_groups_and_drops_noise(self):
        dets = [
            Detection(10, 10, 1.0),
            Detection(10, 11, 1.0),
            Detection(11, 10, 1.0),
            Detection(40, 40, 1.0),  # isolated -> noise
        ]
        clusters = cluster_detections(dets, eps=2.0, min_pts=3)
        assert len(clusters) == 1
        assert len(clusters[0].detections) == 3


class TestExtractMeasurement:
    radar = RadarConfig()
    fft = FftConfig()

    def _cube_for(self, states, noise=0.0, rng=None):
        frame = synth_frame(states, self.radar, noise_sigma=noise, rng=rng)
        return radar_cube(frame, self.radar, self.fft)

    def test_single_cell_boresight_target(self):
        obj = SceneObject(obj_id=0, waypoints=((0.0, 15.0, 0.0),), rcs_gain=1.0)
        cube = self._cube_for([(obj, np.array([15.0, 0.0]), np.zeros(2))])
        cluster = Cluster(0, [Detection(85, 64, 1.0)])
        meas = extract_measurement(cluster, cube)
        assert meas.rho == pytest.approx(14.9414, abs=1e-3)
        assert meas.v == 0.0
        assert meas.theta == 0.0

    def test_symmetric_cluster_averages_ranges(self):
        obj = SceneObject(obj_id=0, waypoints=((0.0, 15.0, 0.0),), rcs_gain=1.0)
        cube = self._cube_for([(obj, np.array([15.0, 0.0]), np.zeros(2))])
        cluster = Cluster(0, [Detection(84, 64, 1.0), Detection(86, 64, 1.0)])
        meas = extract_measurement(cluster, cube)
        expected = 0.5 * (cube.range_axis[84] + cube.range_axis[86])
        assert meas.rho == pytest.approx(expected)
        assert cube.range_axis[84] <= meas.rho <= cube.range_axis[86]

    def test_two_targets_angle_argmax_takes_stronger(self):
        # same range cell, well-separated angles; the 3x stronger echo wins
        # (angles closer than the 4-element beamwidth interfere instead)
        pos_a = 15.0 * np.array([np.cos(0.9), np.sin(0.9)])
        pos_b = 15.0 * np.array([np.cos(-0.6), np.sin(-0.6)])
        a = SceneObject(obj_id=1, waypoints=((0.0, *pos_a),), rcs_gain=3.0)
        b = SceneObject(obj_id=2, waypoints=((0.0, *pos_b),), rcs_gain=1.0)
        cube = self._cube_for([(a, pos_a, np.zeros(2)), (b, pos_b, np.zeros(2))])
        cluster = Cluster(0, [Detection(85, 64, 1.0)])
        meas = extract_measurement(cluster, cube)
        expected_bin = round(32 + 32 * np.sin(0.9))
        assert expected_bin == 57
        # oracle: recompute the profile sum explicitly
        profile = np.abs(cube.data[:, 85, 64])
        assert np.argmax(profile) == expected_bin
        assert meas.theta == pytest.approx(cube.angle_axis[expected_bin])

    def test_theta_always_on_angle_axis(self):
        rng = np.random.default_rng(11)
        obj = SceneObject(obj_id=0, waypoints=((0.0, 20.0, 5.0),), rcs_gain=1.0)
        cube = self._cube_for(
            [(obj, np.array([20.0, 5.0]), np.array([1.0, -2.0]))], noise=0.1, rng=rng
        )
        cluster = Cluster(0, [Detection(100, 60, 1.0), Detection(101, 60, 1.0)])
        meas = extract_measurement(cluster, cube)
        assert meas.theta in cube.angle_axis
