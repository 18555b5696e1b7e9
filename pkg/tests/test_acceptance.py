"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
complete.  Everything is seeded; the outcomes are deterministic.
"""

import itertools
import math
import time

import numpy as np

from oracles import (
    cfar_reference,
    dbscan_reference,
    direct_cube,
    kalman_linear_update,
    true_bins,
)

from radarblock.detect import CfarConfig, cfar_2d, dbscan
from radarblock.dsp import FftConfig, radar_cube, range_angle_map, range_velocity_map
from radarblock.harness import ExperimentConfig, run_experiment
from radarblock.metrics import evaluate
from radarblock.predict import future_label
from radarblock.sim import (
    RadarConfig,
    RadarFrameCube,
    SceneObject,
    ScenarioConfig,
    generate_dataset,
    synth_frame,
)
from radarblock.tracking import (
    AssociationConfig,
    Tracker,
    TrackState,
    UkfConfig,
    cv_transition,
    measure,
    sigma_points,
    ukf_update,
)
from radarblock.detect import ObjectMeasurement


def criterion(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


def random_small_radar(rng):
    s = int(2 ** rng.integers(4, 7))  # 16..64 samples
    l = int(2 ** rng.integers(3, 6))  # 8..32 chirps
    return RadarConfig(
        chirps_per_frame=l,
        samples_per_chirp=s,
        chirp_duration=s / 4.5e6 * 1.1,
        idle_time=5e-6,
        bandwidth=150e6,
    )


def test_fft_matches_direct_dft():
    """All three FFT axes against a dense DFT on 50 random frames, <10 s."""
    rng = np.random.default_rng(100)
    t0 = time.time()
    worst = 0.0
    for i in range(50):
        if i < 44:
            radar = random_small_radar(rng)
            fft = FftConfig(
                n_range=1 << int(np.ceil(np.log2(radar.samples_per_chirp))),
                n_doppler=1 << int(np.ceil(np.log2(radar.chirps_per_frame))),
                n_angle=8,
            )
        else:
            radar = RadarConfig()
            fft = FftConfig()
        shape = (radar.num_rx, radar.samples_per_chirp, radar.chirps_per_frame)
        frame = RadarFrameCube(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        cube = radar_cube(frame, radar, fft)
        ref = direct_cube(frame.samples, fft.n_range, fft.n_doppler, fft.n_angle)
        worst = max(worst, np.linalg.norm(cube.data - ref) / np.linalg.norm(ref))
    elapsed = time.time() - t0
    criterion(
        "FFT oracle: 50 random frames, all axes, <=1e-6 relative",
        worst <= 1e-6 and elapsed < 10.0,
        f"worst rel err {worst:.2e}, {elapsed:.1f}s",
    )


def test_point_target_recovery():
    """100 random in-bounds targets at 20 dB SNR: map argmax within 1 bin, >=95."""
    radar = RadarConfig()
    fft = FftConfig()
    rng = np.random.default_rng(101)
    hits = 0
    t0 = time.time()
    for i in range(100):
        r = rng.uniform(3.0, 43.0)
        theta = rng.uniform(-1.0, 1.0)
        v_r = rng.uniform(-0.9, 0.9) * radar.max_velocity
        v_t = rng.uniform(-3.0, 3.0)
        radial = np.array([math.cos(theta), math.sin(theta)])
        tangential = np.array([-math.sin(theta), math.cos(theta)])
        obj = SceneObject(obj_id=i, waypoints=((0.0, *(r * radial)),), rcs_gain=1.0)
        state = [(obj, r * radial, v_r * radial + v_t * tangential)]
        frame = synth_frame(state, radar, noise_sigma=0.1, rng=rng)  # 20 dB per sample
        cube = radar_cube(frame, radar, fft)
        rb, vb, ab = true_bins(r, v_r, theta, radar, fft)
        rv_peak = np.unravel_index(np.argmax(range_velocity_map(cube).data), (256, 128))
        ra_peak = np.unravel_index(np.argmax(range_angle_map(cube).data), (256, 64))
        hits += (
            abs(rv_peak[0] - rb) <= 1.0
            and abs(rv_peak[1] - vb) <= 1.0
            and abs(ra_peak[0] - rb) <= 1.0
            and abs(ra_peak[1] - ab) <= 1.0
        )
    criterion(
        "point-target recovery at 20 dB SNR",
        hits >= 95,
        f"{hits}/100 within one bin, {time.time() - t0:.1f}s",
    )


def test_cfar_false_alarm_rate_and_oracle():
    """Design-P_fa behavior on >=1e5 exponential cells; exact oracle equality."""
    rng = np.random.default_rng(102)
    cfg = CfarConfig(train=(8, 4), guard=(2, 1), p_fa=1e-3)
    cells = alarms = 0
    for _ in range(4):
        m = rng.exponential(1.0, size=(256, 128))
        binary, _ = cfar_2d(m, cfg)
        cells += m.size
        alarms += int(binary.sum())
    rate = alarms / cells

    exact = True
    for shape, ccfg in [
        ((64, 64), CfarConfig(train=(8, 4), guard=(2, 1))),
        ((64, 48), CfarConfig(train=(3, 3), guard=(1, 1))),
        ((32, 64), CfarConfig(train=(4, 2), guard=(0, 0))),
        ((48, 40), CfarConfig(train=(5, 3), guard=(2, 1), alpha=4.0)),
    ]:
        m = rng.exponential(1.0, size=shape)
        binary, _ = cfar_2d(m, ccfg)
        ref = cfar_reference(m, ccfg.train, ccfg.guard, ccfg.resolved_alpha)
        exact = exact and np.array_equal(binary, ref)

    criterion(
        "CFAR: empirical P_fa in [0.5,2]x1e-3 and oracle-exact",
        0.5e-3 <= rate <= 2e-3 and exact,
        f"P_fa {rate:.2e} over {cells} cells, oracle equality {exact}",
    )


def test_dbscan_matches_reference():
    """Exact partition match with the O(n^2) reference on 100 random instances."""
    rng = np.random.default_rng(103)
    all_match = True
    for _ in range(100):
        n = int(rng.integers(10, 201))
        # mixture of clumps and background to exercise cores/borders/noise
        n_clumps = int(rng.integers(1, 5))
        centers = rng.uniform(0, 60, size=(n_clumps, 2))
        pts = np.vstack(
            [rng.normal(centers[i % n_clumps], 1.5, size=(1, 2)) for i in range(n // 2)]
            + [rng.uniform(0, 60, size=(n - n // 2, 2))]
        )
        eps = float(rng.uniform(1.5, 4.0))
        min_pts = int(rng.integers(2, 6))
        got = dbscan(pts, eps=eps, min_pts=min_pts)
        ref = dbscan_reference(pts, eps=eps, min_pts=min_pts)
        all_match = all_match and np.array_equal(got, ref)
    criterion("DBSCAN: 100 random instances equal the brute-force reference", all_match)


def test_ukf_properties():
    """Sigma-point moments to 1e-12; linear-stub equality to 1e-9; RMSE win."""
    rng = np.random.default_rng(104)

    sigma_ok = True
    for _ in range(30):
        mean = rng.standard_normal(4) * 20
        a = rng.standard_normal((4, 4))
        cov = a @ a.T + 1e-9 * np.eye(4)
        pts, w_mean, w_cov = sigma_points(mean, cov, alpha=0.1, beta=2.0, kappa=0.0)
        d = pts - mean
        mean_err = np.abs(w_mean @ pts - mean).max()
        cov_err = np.abs((w_cov * d.T) @ d - cov).max()
        scale = max(1.0, np.abs(cov).max(), np.abs(mean).max())
        sigma_ok = sigma_ok and mean_err <= 1e-12 * scale and cov_err <= 1e-12 * scale

    linear_ok = True
    h = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0.3, -0.2, 0.7, 0.1]])
    r = np.diag([0.05, 0.08, 0.2])
    for _ in range(20):
        state = rng.standard_normal(4) * 5
        a = rng.standard_normal((4, 4))
        cov = a @ a.T + 1e-6 * np.eye(4)
        y = h @ state + rng.standard_normal(3)
        trk = TrackState(state=state.copy(), cov=cov.copy(), track_id=0)
        ukf_update(trk, y, UkfConfig(), meas_fn=lambda z: h @ z, meas_noise=r)
        ref_state, ref_cov = kalman_linear_update(state, cov, h, r, y)
        linear_ok = (
            linear_ok
            and np.abs(trk.state - ref_state).max() <= 1e-9
            and np.abs(trk.cov - ref_cov).max() <= 1e-9
        )

    # 20 constant-velocity targets, noise-free dynamics, noisy measurements
    cfg = UkfConfig()
    noise_std = np.sqrt(np.diag(cfg.meas_noise))
    wins = 0
    filt_sq, raw_sq = [], []
    for _ in range(20):
        # drawn so the target stays in the front half-plane for all 37 frames
        state = np.array(
            [rng.uniform(10, 30), rng.uniform(-15, 15), rng.uniform(-1, 3), rng.uniform(-3, 3)]
        )
        f = cv_transition(cfg.frame_period)
        tracker = Tracker(cfg, AssociationConfig(gate=10.0))
        track_filt, track_raw = [], []
        for k in range(37):
            y = measure(state) + rng.standard_normal(3) * noise_std
            y[0] = abs(y[0])
            m = ObjectMeasurement(rho=float(y[0]), v=float(y[1]), theta=float(y[2]))
            tracks = tracker.step([m])
            raw_pos = np.array([m.rho * math.cos(m.theta), m.rho * math.sin(m.theta)])
            if 5 <= k <= 36:
                track_filt.append(np.sum((tracks[0].state[:2] - state[:2]) ** 2))
                track_raw.append(np.sum((raw_pos - state[:2]) ** 2))
            state = f @ state
        wins += math.sqrt(np.mean(track_filt)) < math.sqrt(np.mean(track_raw))
        filt_sq += track_filt
        raw_sq += track_raw
    rmse_filt = math.sqrt(np.mean(filt_sq))
    rmse_raw = math.sqrt(np.mean(raw_sq))

    criterion(
        "UKF: sigma moments 1e-12, linear equality 1e-9, filter beats raw",
        sigma_ok and linear_ok and rmse_filt < rmse_raw,
        f"pooled RMSE {rmse_filt:.3f} vs raw {rmse_raw:.3f} m, {wins}/20 tracks win",
    )


def test_labeling_properties():
    """Exhaustive OR equality for 2^10 patterns; monotone blocked fraction."""
    exhaustive_ok = True
    for bits in itertools.product((0, 1), repeat=10):
        blocked = [0] + list(bits)
        expected = 0
        for b in bits:
            expected = expected or b
        exhaustive_ok = exhaustive_ok and future_label(blocked, 0, 10) == expected

    scenario = ScenarioConfig()
    data = generate_dataset(scenario, 100, seed=7, with_frames=False)
    t_last = scenario.num_frames - 1 - 10
    fractions = []
    for t_p in range(1, 11):
        labels = [
            future_label(seq.blocked, t, t_p)
            for seq in data
            for t in range(0, t_last + 1)
        ]
        fractions.append(np.mean(labels))
    monotone = all(a <= b for a, b in zip(fractions, fractions[1:]))
    criterion(
        "labeling: exhaustive OR and monotone blocked fraction",
        exhaustive_ok and monotone,
        f"fraction {fractions[0]:.3f} -> {fractions[-1]:.3f} over T_p 1..10",
    )


def test_end_to_end_tracking_knn():
    """100-sequence pipeline: F1 >= 0.75 and accuracy >= 0.85 at ~1 s, < 5 min."""
    t0 = time.time()
    config = ExperimentConfig(n_sequences=100, seed=0, split_seed=0, sweep=(9,))
    result = run_experiment(config)
    elapsed = time.time() - t0
    row = result.rows[0]
    report = row.report
    horizon_ok = abs(row.horizon_s - 1.0) < 0.1
    criterion(
        "end-to-end tracking + k-NN at 1 s horizon",
        report.f1 is not None
        and report.f1 >= 0.75
        and report.accuracy >= 0.85
        and horizon_ok
        and elapsed < 300.0,
        f"f1 {report.f1:.3f}, accuracy {report.accuracy:.3f}, "
        f"horizon {row.horizon_s:.3f}s, {elapsed:.0f}s runtime",
    )


def test_metrics_exact_on_fixed_tables():
    """Hand-computed precision/recall/F1 on 10 fixed confusion tables, exact."""
    tables = [
        (9, 1, 89, 1),
        (50, 0, 50, 0),
        (10, 10, 10, 10),
        (1, 0, 98, 1),
        (0, 5, 90, 5),
        (25, 25, 25, 25),
        (3, 2, 90, 5),
        (40, 10, 45, 5),
        (7, 3, 80, 10),
        (12, 4, 60, 24),
    ]
    ok = True
    for tp, fp, tn, fn in tables:
        preds = [1] * tp + [1] * fp + [0] * tn + [0] * fn
        labels = [1] * tp + [0] * fp + [0] * tn + [1] * fn
        report = evaluate(preds, labels)
        ok = ok and report.accuracy == (tp + tn) / (tp + fp + tn + fn)
        expected_p = tp / (tp + fp) if tp + fp else None
        expected_r = tp / (tp + fn) if tp + fn else None
        ok = ok and report.precision == expected_p and report.recall == expected_r
        if expected_p is not None and expected_r is not None:
            expected_f1 = (
                0.0 if expected_p + expected_r == 0
                else 2 * expected_p * expected_r / (expected_p + expected_r)
            )
            ok = ok and report.f1 == expected_f1
        else:
            ok = ok and report.f1 is None
    criterion("metrics: 10 fixed confusion tables reproduced exactly", ok)
