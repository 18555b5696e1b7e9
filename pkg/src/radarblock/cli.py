"""Command-line front end.

Subcommands mirror the pipeline stages: simulate raw data, process it into
maps, detect and track objects, build labeled datasets, fit and apply the
k-NN predictor, score predictions, run full sweeps, and exchange range-angle
maps / predictions with the neural lane.  Every run writes its resolved
settings next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .detect import CfarConfig, cfar_2d, cluster_detections, extract_measurement
from .dsp import FftConfig, radar_cube, range_angle_map, range_velocity_map
from .harness import (
    ExperimentConfig,
    PipelineConfig,
    evaluate_prediction_rows,
    export_range_angle,
    frame_measurements,
    run_experiment,
)
from .predict import LabelConfig, future_label, knn_fit, knn_predict, knn_scores, split_sequences, stack_states
from .sim import RadarFrameCube, ScenarioConfig, generate_dataset
from .tracking import AssociationConfig, Tracker, UkfConfig
from . import io as rio


def _parse_ints(text):
    return tuple(int(v) for v in text.split(","))


def _scenario_from(args) -> ScenarioConfig:
    if args.scenario:
        return rio.load_scenario(args.scenario)
    return ScenarioConfig()


def _add_scenario_args(p):
    p.add_argument("--scenario", help="scenario INI file (defaults to the built-in street scene)")
    p.add_argument("--sequences", type=int, default=20, help="number of blockage sequences")
    p.add_argument("--seed", type=int, default=0, help="master generation seed")


def _add_pipeline_args(p):
    p.add_argument("--fft", default="256,128,64", help="FFT sizes n_range,n_doppler,n_angle")
    p.add_argument(
        "--rect",
        action="store_true",
        help="rectangular range/Doppler windows (default: Hann)",
    )
    p.add_argument("--cfar-train", default="8,4", help="CFAR training half-window (range,velocity)")
    p.add_argument("--cfar-guard", default="2,1", help="CFAR guard half-window (range,velocity)")
    p.add_argument("--cfar-alpha", type=float, default=None, help="CFAR threshold multiplier")
    p.add_argument("--cfar-pfa", type=float, default=1e-3, help="design false-alarm rate")
    p.add_argument("--eps", type=float, default=3.0, help="DBSCAN radius in bins")
    p.add_argument("--min-pts", type=int, default=3, help="DBSCAN core threshold")
    p.add_argument("--gate", type=float, default=3.0, help="association gate")
    p.add_argument("--max-misses", type=int, default=3, help="frames before track termination")


def _pipeline_from(args) -> PipelineConfig:
    n_range, n_doppler, n_angle = _parse_ints(args.fft)
    window = "rect" if args.rect else "hann"
    fft = FftConfig(
        n_range=n_range,
        n_doppler=n_doppler,
        n_angle=n_angle,
        window_range=window,
        window_doppler=window,
    )
    cfar = CfarConfig(
        train=_parse_ints(args.cfar_train),
        guard=_parse_ints(args.cfar_guard),
        alpha=args.cfar_alpha,
        p_fa=args.cfar_pfa,
    )
    assoc = AssociationConfig(gate=args.gate, max_misses=args.max_misses)
    return PipelineConfig(
        fft=fft, cfar=cfar, dbscan_eps=args.eps, dbscan_min_pts=args.min_pts, assoc=assoc
    )


def _write_resolved(path, args, skip=("func",)):
    with open(path, "w") as fh:
        fh.write("[resolved]\n")
        for key, value in sorted(vars(args).items()):
            if key in skip or value is None:
                continue
            fh.write(f"{key} = {value}\n")


def _load_dataset_dir(datadir):
    """Read a simulate output directory: scenario, per-sequence blocked/truth,
    and a frame loader."""
    scenario = rio.load_scenario(os.path.join(datadir, "scenario.ini"))
    manifest = rio.read_manifest(os.path.join(datadir, "manifest.csv"))
    frames_dir = os.path.join(datadir, "frames")

    def load_frames(seq_id, n_frames):
        frames = []
        for t in range(n_frames):
            path = os.path.join(frames_dir, rio.frame_filename(seq_id, t))
            if not os.path.exists(path):
                raise FileNotFoundError(
                    f"{path} missing; was the dataset simulated with --no-frames?"
                )
            frame, _ = rio.read_frame(path)
            frames.append(frame)
        return frames

    return scenario, manifest, load_frames


def cmd_simulate(args):
    scenario = _scenario_from(args)
    os.makedirs(args.outdir, exist_ok=True)
    frames_dir = os.path.join(args.outdir, "frames")
    if not args.no_frames:
        os.makedirs(frames_dir, exist_ok=True)
    sequences = generate_dataset(
        scenario, args.sequences, seed=args.seed, with_frames=not args.no_frames
    )
    for seq in sequences:
        if seq.frames is None:
            continue
        for t, frame in enumerate(seq.frames):
            rio.write_frame(
                os.path.join(frames_dir, rio.frame_filename(seq.seq_id, t)), frame, scenario.radar
            )
        seq.frames = None  # free memory as we go
    rio.write_manifest(os.path.join(args.outdir, "manifest.csv"), sequences)
    rio.save_scenario(os.path.join(args.outdir, "scenario.ini"), scenario)
    print(f"wrote {args.sequences} sequences to {args.outdir}")
    return 0


def cmd_process(args):
    scenario, manifest, load_frames = _load_dataset_dir(args.datadir)
    pipe = _pipeline_from(args)
    os.makedirs(args.outdir, exist_ok=True)
    for seq_id in sorted(manifest):
        n = len(manifest[seq_id]["blocked"])
        for t, frame in enumerate(load_frames(seq_id, n)):
            f32 = RadarFrameCube(samples=frame.samples.astype(np.complex64), timestamp=t)
            cube = radar_cube(f32, scenario.radar, pipe.fft)
            rv = range_velocity_map(cube)
            ra = range_angle_map(cube)
            stem = os.path.join(args.outdir, f"seq{seq_id:04d}_f{t:03d}")
            rio.write_map(stem + "_rv.bin", rv.data, "range_velocity",
                          {"rows": "range", "cols": "velocity"})
            rio.write_map(stem + "_ra.bin", ra.data, "range_angle",
                          {"rows": "range", "cols": "angle"})
            if args.pgm:
                rio.write_pgm(stem + "_rv.pgm", rv.data)
                rio.write_pgm(stem + "_ra.pgm", ra.data)
    _write_resolved(os.path.join(args.outdir, "process.cfg"), args)
    print(f"wrote maps to {args.outdir}")
    return 0


def cmd_detect(args):
    scenario, manifest, load_frames = _load_dataset_dir(args.datadir)
    pipe = _pipeline_from(args)
    rows = []
    for seq_id in sorted(manifest):
        n = len(manifest[seq_id]["blocked"])
        for t, frame in enumerate(load_frames(seq_id, n)):
            f32 = RadarFrameCube(samples=frame.samples.astype(np.complex64), timestamp=t)
            cube = radar_cube(f32, scenario.radar, pipe.fft)
            rv = range_velocity_map(cube)
            _, detections = cfar_2d(rv.data, pipe.cfar)
            clusters = cluster_detections(
                detections, eps=pipe.dbscan_eps, min_pts=pipe.dbscan_min_pts,
                scale=pipe.dbscan_scale,
            )
            for cluster in clusters:
                meas = extract_measurement(cluster, cube)
                for det in cluster.detections:
                    rows.append((seq_id, t, cluster.cluster_id, det, meas))
    rio.write_detections(args.out, rows)
    _write_resolved(args.out + ".cfg", args)
    print(f"wrote {len(rows)} detections to {args.out}")
    return 0


def cmd_track(args):
    scenario, manifest, load_frames = _load_dataset_dir(args.datadir)
    pipe = _pipeline_from(args)
    rows = []
    for seq_id in sorted(manifest):
        n = len(manifest[seq_id]["blocked"])
        tracker = Tracker(ukf_config=pipe.ukf, assoc_config=pipe.assoc)
        for t, frame in enumerate(load_frames(seq_id, n)):
            measurements, _, _ = frame_measurements(frame, scenario, pipe)
            tracker.step(measurements)
            for trk in tracker.tracks:
                rows.append((seq_id, t, trk, tracker.last_associations.get(trk.track_id)))
    rio.write_track_log(args.out, rows)
    _write_resolved(args.out + ".cfg", args)
    print(f"wrote {len(rows)} track rows to {args.out}")
    return 0


def cmd_build_dataset(args):
    scenario, manifest, load_frames = _load_dataset_dir(args.datadir)
    pipe = _pipeline_from(args)
    label_cfg = LabelConfig(obs_window=args.obs_window, pred_window=args.pred_window)

    split = split_sequences(sorted(manifest), seed=args.split_seed)
    states_by_seq = {}
    for seq_id in sorted(manifest):
        n = len(manifest[seq_id]["blocked"])
        tracker = Tracker(ukf_config=pipe.ukf, assoc_config=pipe.assoc)
        per_frame = []
        for frame in load_frames(seq_id, n):
            measurements, _, _ = frame_measurements(frame, scenario, pipe)
            tracker.step(measurements)
            per_frame.append(
                [type(t)(t.state.copy(), t.cov.copy(), t.track_id, t.misses, t.age) for t in tracker.tracks]
            )
        states_by_seq[seq_id] = per_frame

    peak = max(
        (len(s) for sid in split if split[sid] == "train" for s in states_by_seq[sid]),
        default=0,
    )
    k_max = max(1, min(peak, args.max_tracks_cap))

    from .predict import LabeledSample

    samples = []
    for seq_id in sorted(manifest):
        blocked = manifest[seq_id]["blocked"]
        for t in range(label_cfg.obs_window - 1, len(blocked)):
            label = future_label(blocked, t, label_cfg.pred_window)
            if label is None:
                continue
            samples.append(
                LabeledSample(
                    features=stack_states(states_by_seq[seq_id][t], k_max),
                    label=label,
                    seq_id=seq_id,
                    frame_index=t,
                    split=split[seq_id],
                )
            )
    rio.write_samples(args.out, samples)
    _write_resolved(args.out + ".cfg", args)
    print(f"wrote {len(samples)} samples (feature width 4x{k_max}) to {args.out}")
    return 0


def cmd_fit_knn(args):
    samples = [s for s in rio.read_samples(args.samples) if s.split == "train"]
    if not samples:
        raise SystemExit("no training samples in the input file")
    x = np.array([s.features for s in samples])
    y = [s.label for s in samples]
    k = min(args.k, len(x))
    if k % 2 == 0:
        k -= 1
    model = knn_fit(x, y, k=k)
    rio.write_knn_model(args.out, model)
    _write_resolved(args.out + ".cfg", args)
    print(f"fit k-NN (k={k}) on {len(x)} samples -> {args.out}")
    return 0


def cmd_predict(args):
    model = rio.read_knn_model(args.model)
    samples = [s for s in rio.read_samples(args.samples) if s.split == args.split]
    if not samples:
        raise SystemExit(f"no samples with split {args.split!r}")
    x = np.array([s.features for s in samples])
    scores = knn_scores(model, x)
    preds = (scores > 0.5).astype(int)
    rio.write_predictions(
        args.out,
        [(s.seq_id, s.frame_index, float(sc), int(p)) for s, sc, p in zip(samples, scores, preds)],
    )
    _write_resolved(args.out + ".cfg", args)
    print(f"wrote {len(preds)} predictions to {args.out}")
    return 0


def _evaluate_files(labels_path, preds_path, split):
    labels = {}
    with open(labels_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if split and row["split"] != split:
                continue
            labels[(int(row["seq_id"]), int(row["frame_index"]))] = int(row["label"])
    if not labels:
        raise SystemExit(f"no labeled samples with split {split!r} in {labels_path}")
    predictions = rio.read_predictions(preds_path)
    return evaluate_prediction_rows(labels, predictions)


def cmd_evaluate(args):
    report = _evaluate_files(args.samples, args.preds, args.split)
    for line in report.format_lines():
        print(line)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(report.format_lines()) + "\n")
        _write_resolved(args.out + ".cfg", args)
    return 0


def cmd_sweep(args):
    scenario = _scenario_from(args)
    config = ExperimentConfig(
        scenario=scenario,
        pipeline=_pipeline_from(args),
        n_sequences=args.sequences,
        seed=args.seed,
        split_seed=args.split_seed,
        sweep=_parse_ints(args.sweep),
        obs_window=args.obs_window,
        knn_k=args.k,
        max_tracks_cap=args.max_tracks_cap,
    )
    result = run_experiment(config, outdir=args.outdir)
    for row in result.rows:
        r = row.report
        f1 = "undefined" if r.f1 is None else f"{r.f1:.4f}"
        print(
            f"pred_window {row.pred_window:2d} ({row.horizon_s * 1000:6.1f} ms): "
            f"accuracy {r.accuracy:.4f}  f1 {f1}"
        )
    return 0


def cmd_export_ra(args):
    scenario = _scenario_from(args)
    n_range, n_doppler, n_angle = _parse_ints(args.fft)
    export_range_angle(
        scenario,
        args.sequences,
        seed=args.seed,
        split_seed=args.split_seed,
        label_config=LabelConfig(obs_window=args.obs_window, pred_window=args.pred_window),
        outdir=args.outdir,
        fft=FftConfig(n_range=n_range, n_doppler=n_doppler, n_angle=n_angle),
    )
    rio.save_scenario(os.path.join(args.outdir, "scenario.ini"), scenario)
    _write_resolved(os.path.join(args.outdir, "export.cfg"), args)
    print(f"exported range-angle maps for {args.sequences} sequences to {args.outdir}")
    return 0


def cmd_import_preds(args):
    report = _evaluate_files(args.samples, args.preds, args.split)
    for line in report.format_lines():
        print(line)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(report.format_lines()) + "\n")
        _write_resolved(args.out + ".cfg", args)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="radarblock",
        description="radar-aided mmWave blockage prediction on synthetic FMCW scenes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate raw frames, labels and truth")
    _add_scenario_args(p)
    p.add_argument("--outdir", required=True)
    p.add_argument("--no-frames", action="store_true", help="labels and truth only")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="frames -> range-velocity / range-angle maps")
    p.add_argument("--datadir", required=True, help="simulate output directory")
    p.add_argument("--outdir", required=True)
    p.add_argument("--pgm", action="store_true", help="also write PGM previews")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("detect", help="CFAR + DBSCAN detections per frame")
    p.add_argument("--datadir", required=True)
    p.add_argument("--out", required=True, help="detections CSV")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("track", help="run the tracker, log tracks per frame")
    p.add_argument("--datadir", required=True)
    p.add_argument("--out", required=True, help="track log CSV")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("build-dataset", help="tracked features + labels -> samples CSV")
    p.add_argument("--datadir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pred-window", type=int, default=10)
    p.add_argument("--obs-window", type=int, default=1)
    p.add_argument("--max-tracks-cap", type=int, default=5)
    p.add_argument("--split-seed", type=int, default=0)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("fit-knn", help="fit the k-NN model on the train split")
    p.add_argument("--samples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_fit_knn)

    p = sub.add_parser("predict", help="k-NN predictions for one split")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a predictions file against labels")
    p.add_argument("--preds", required=True)
    p.add_argument("--samples", required=True, help="samples CSV carrying the labels")
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="full experiment over prediction windows")
    _add_scenario_args(p)
    p.add_argument("--outdir", required=True)
    p.add_argument("--sweep", default="1,2,3,4,5,6,7,8,9,10")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--obs-window", type=int, default=1)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--max-tracks-cap", type=int, default=5)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-ra", help="range-angle map windows + labels for the neural lane")
    _add_scenario_args(p)
    p.add_argument("--outdir", required=True)
    p.add_argument("--pred-window", type=int, default=10)
    p.add_argument("--obs-window", type=int, default=8)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--fft", default="256,128,64")
    p.set_defaults(func=cmd_export_ra)

    p = sub.add_parser("import-preds", help="score an external predictions file")
    p.add_argument("--preds", required=True)
    p.add_argument("--samples", required=True, help="ra_samples.csv or samples CSV with labels")
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="also write the report to this file")
    p.set_defaults(func=cmd_import_preds)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
