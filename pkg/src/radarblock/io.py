"""File formats at the package boundary.

* raw frames: little-endian complex64 binary (interleaved re/im float32) in
  antenna-major (antenna, sample, chirp) order, with a text key=value sidecar
  header recording shape and radar parameters
* sequence manifest, samples, detections, track logs, predictions: CSV
* maps: flat float32 binary + text header, optional PGM for eyeballing
* scenario configs: INI-style key/value sections with archetype tables
* k-NN models: CSV training matrix with '#' metadata header lines

All writers format floats with ``repr`` so reruns are byte-identical.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import os
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .detect import Detection, ObjectMeasurement
from .predict import KnnModel, LabeledSample
from .sim import (
    Archetype,
    BlockageSequence,
    LinkModel,
    RadarConfig,
    RadarFrameCube,
    ScenarioConfig,
)

FRAME_FORMAT = "radarblock-frame-v1"
MAP_FORMAT = "radarblock-map-v1"
KNN_FORMAT = "radarblock-knn-v1"


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (tuple, list, np.ndarray)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


# ---------------------------------------------------------------------------
# Raw frames
# ---------------------------------------------------------------------------

def write_frame(path: str, frame: RadarFrameCube, radar: RadarConfig) -> None:
    """Write `path` (complex64 binary) and `path + '.hdr'` (text header)."""
    data = np.ascontiguousarray(frame.samples.astype(np.complex64))
    if data.dtype.byteorder == ">":  # enforce little-endian on exotic hosts
        data = data.byteswap().view(data.dtype.newbyteorder("<"))
    data.tofile(path)
    lines = [
        f"format = {FRAME_FORMAT}",
        "dtype = complex64",
        "byteorder = little",
        "order = antenna,sample,chirp",
        f"shape = {_fmt(frame.samples.shape)}",
        f"timestamp = {frame.timestamp}",
    ]
    for f in dataclasses.fields(radar):
        lines.append(f"{f.name} = {_fmt(getattr(radar, f.name))}")
    with open(path + ".hdr", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_frame(path: str) -> Tuple[RadarFrameCube, RadarConfig]:
    header = _read_kv(path + ".hdr")
    if header.get("format") != FRAME_FORMAT:
        raise ValueError(f"{path}: unknown frame format {header.get('format')!r}")
    shape = tuple(int(v) for v in header["shape"].split(","))
    data = np.fromfile(path, dtype="<c8").reshape(shape)
    radar = RadarConfig(
        carrier_freq=float(header["carrier_freq"]),
        bandwidth=float(header["bandwidth"]),
        chirp_duration=float(header["chirp_duration"]),
        idle_time=float(header["idle_time"]),
        frame_period=float(header["frame_period"]),
        chirps_per_frame=int(header["chirps_per_frame"]),
        samples_per_chirp=int(header["samples_per_chirp"]),
        num_rx=int(header["num_rx"]),
        sample_rate=float(header["sample_rate"]),
        antenna_spacing=float(header["antenna_spacing"]),
    )
    return RadarFrameCube(samples=data, timestamp=int(header["timestamp"])), radar


def _read_kv(path: str) -> Dict[str, str]:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def frame_filename(seq_id: int, frame_index: int) -> str:
    return f"seq{seq_id:04d}_f{frame_index:03d}.bin"


# ---------------------------------------------------------------------------
# Sequence manifest
# ---------------------------------------------------------------------------

def _truth_to_str(states) -> str:
    parts = []
    for obj, pos, vel in states:
        parts.append(
            f"{obj.obj_id}:{repr(float(pos[0]))}:{repr(float(pos[1]))}:"
            f"{repr(float(vel[0]))}:{repr(float(vel[1]))}"
        )
    return ";".join(parts)


def write_manifest(path: str, sequences: Sequence[BlockageSequence]) -> None:
    """One CSV row per frame: sequence id, frame index, blockage bit, truth states."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seq_id", "frame_index", "blocked", "truth"])
        for seq in sequences:
            for k in range(len(seq)):
                writer.writerow(
                    [seq.seq_id, k, int(seq.blocked[k]), _truth_to_str(seq.truth[k])]
                )


def read_manifest(path: str):
    """Returns {seq_id: {"blocked": array, "truth": list per frame of tuples}}."""
    rows = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            sid = int(row["seq_id"])
            rows.setdefault(sid, []).append(row)
    out = {}
    for sid, seq_rows in rows.items():
        seq_rows.sort(key=lambda r: int(r["frame_index"]))
        blocked = np.array([int(r["blocked"]) for r in seq_rows], dtype=bool)
        truth = []
        for r in seq_rows:
            states = []
            if r["truth"]:
                for part in r["truth"].split(";"):
                    oid, x, y, vx, vy = part.split(":")
                    states.append((int(oid), np.array([float(x), float(y)]), np.array([float(vx), float(vy)])))
            truth.append(states)
        out[sid] = {"blocked": blocked, "truth": truth}
    return out


# ---------------------------------------------------------------------------
# Scenario configs
# ---------------------------------------------------------------------------

def save_scenario(path: str, scenario: ScenarioConfig) -> None:
    cp = configparser.ConfigParser()
    cp["radar"] = {
        f.name: _fmt(getattr(scenario.radar, f.name))
        for f in dataclasses.fields(RadarConfig)
    }
    cp["link"] = {
        f.name: _fmt(getattr(scenario.link, f.name)) for f in dataclasses.fields(LinkModel)
    }
    cp["scene"] = {
        "cross_x": _fmt(scenario.cross_x),
        "distractor_lane_x": _fmt(scenario.distractor_lane_x),
        "distractor_span": _fmt(scenario.distractor_span),
        "num_distractors": _fmt(scenario.num_distractors),
        "visibility_margin": _fmt(scenario.visibility_margin),
        "noise_sigma": _fmt(scenario.noise_sigma),
        "pre_frames": _fmt(scenario.pre_frames),
        "post_frames": _fmt(scenario.post_frames),
        "range_decay": str(scenario.range_decay).lower(),
        "max_resample": _fmt(scenario.max_resample),
    }
    for arch in scenario.archetypes:
        cp[f"archetype:{arch.name}"] = {
            "speed": _fmt(arch.speed),
            "extent": _fmt(arch.extent),
            "rcs": _fmt(arch.rcs),
            "weight": _fmt(arch.weight),
        }
    with open(path, "w") as fh:
        cp.write(fh)


def _pair(text: str) -> Tuple[float, float]:
    a, b = (float(v) for v in text.split(","))
    return (a, b)


def load_scenario(path: str) -> ScenarioConfig:
    """Read a scenario INI; missing keys fall back to the dataclass defaults."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    cp = configparser.ConfigParser()
    cp.read(path)

    radar_kwargs = {}
    if cp.has_section("radar"):
        sec = cp["radar"]
        for f in dataclasses.fields(RadarConfig):
            if f.name in sec:
                cast = int if f.type == "int" else float
                radar_kwargs[f.name] = cast(sec[f.name])
    radar = RadarConfig(**radar_kwargs)

    link_kwargs = {}
    if cp.has_section("link"):
        sec = cp["link"]
        for name in ("h_los", "h_nlos", "power_threshold"):
            if name in sec:
                link_kwargs[name] = float(sec[name])
        for name in ("tx", "rx"):
            if name in sec:
                link_kwargs[name] = _pair(sec[name])
    link = LinkModel(**link_kwargs)

    scene_kwargs = {}
    if cp.has_section("scene"):
        sec = cp["scene"]
        casts = {
            "cross_x": _pair,
            "distractor_lane_x": _pair,
            "distractor_span": float,
            "visibility_margin": float,
            "noise_sigma": float,
            "pre_frames": int,
            "post_frames": int,
            "max_resample": int,
        }
        for name, cast in casts.items():
            if name in sec:
                scene_kwargs[name] = cast(sec[name])
        if "num_distractors" in sec:
            lo, hi = sec["num_distractors"].split(",")
            scene_kwargs["num_distractors"] = (int(lo), int(hi))
        if "range_decay" in sec:
            scene_kwargs["range_decay"] = sec.getboolean("range_decay")

    archetypes = []
    for section in cp.sections():
        if section.startswith("archetype:"):
            sec = cp[section]
            archetypes.append(
                Archetype(
                    name=section.split(":", 1)[1],
                    speed=_pair(sec["speed"]),
                    extent=_pair(sec["extent"]),
                    rcs=_pair(sec["rcs"]),
                    weight=float(sec.get("weight", "1.0")),
                )
            )
    if archetypes:
        scene_kwargs["archetypes"] = tuple(archetypes)

    return ScenarioConfig(radar=radar, link=link, **scene_kwargs)


# ---------------------------------------------------------------------------
# Map export
# ---------------------------------------------------------------------------

def write_map(path: str, data: np.ndarray, kind: str, axes: Dict[str, str]) -> None:
    """Flat float32 binary plus `path + '.hdr'` describing shape and axes."""
    arr = np.ascontiguousarray(np.asarray(data, dtype="<f4"))
    arr.tofile(path)
    lines = [
        f"format = {MAP_FORMAT}",
        "dtype = float32",
        "byteorder = little",
        f"kind = {kind}",
        f"shape = {_fmt(arr.shape)}",
    ]
    lines += [f"{k} = {v}" for k, v in axes.items()]
    with open(path + ".hdr", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_map(path: str) -> Tuple[np.ndarray, Dict[str, str]]:
    header = _read_kv(path + ".hdr")
    if header.get("format") != MAP_FORMAT:
        raise ValueError(f"{path}: unknown map format {header.get('format')!r}")
    shape = tuple(int(v) for v in header["shape"].split(","))
    return np.fromfile(path, dtype="<f4").reshape(shape), header


def write_pgm(path: str, data: np.ndarray) -> None:
    """8-bit log-magnitude grayscale for quick visual inspection."""
    mag = np.log1p(np.maximum(np.asarray(data, dtype=np.float64), 0.0))
    hi = mag.max()
    if hi > 0:
        mag = mag / hi
    img = (mag * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


# ---------------------------------------------------------------------------
# Samples / predictions / detections / track logs
# ---------------------------------------------------------------------------

def write_samples(path: str, samples: Sequence[LabeledSample]) -> None:
    if not samples:
        raise ValueError("no samples to write")
    dim = len(samples[0].features)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seq_id", "frame_index", "split", "label"] + [f"f{i}" for i in range(dim)])
        for s in samples:
            writer.writerow(
                [s.seq_id, s.frame_index, s.split, s.label] + [repr(float(v)) for v in s.features]
            )


def read_samples(path: str) -> List[LabeledSample]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = len(header) - 4
        for row in reader:
            out.append(
                LabeledSample(
                    features=np.array([float(v) for v in row[4 : 4 + dim]]),
                    label=int(row[3]),
                    seq_id=int(row[0]),
                    frame_index=int(row[1]),
                    split=row[2],
                )
            )
    return out


def write_predictions(path: str, rows: Sequence[Tuple[int, int, float, int]]) -> None:
    """Rows of (seq_id, frame_index, score, prediction)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seq_id", "frame_index", "score", "pred"])
        for sid, t, score, pred in rows:
            writer.writerow([sid, t, repr(float(score)), int(pred)])


def read_predictions(path: str) -> Dict[Tuple[int, int], Tuple[float, int]]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[(int(row["seq_id"]), int(row["frame_index"]))] = (
                float(row["score"]),
                int(row["pred"]),
            )
    return out


def write_detections(path: str, rows) -> None:
    """Rows of (seq_id, frame_index, cluster_id, Detection, ObjectMeasurement)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["seq_id", "frame_index", "cluster_id", "range_bin", "velocity_bin",
             "magnitude", "rho", "v", "theta"]
        )
        for sid, t, cid, det, meas in rows:
            writer.writerow(
                [sid, t, cid, det.range_bin, det.velocity_bin, repr(det.magnitude),
                 repr(meas.rho), repr(meas.v), repr(meas.theta)]
            )


def write_track_log(path: str, rows) -> None:
    """Rows of (seq_id, frame_index, TrackState, ObjectMeasurement | None)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["seq_id", "frame_index", "track_id", "x", "y", "vx", "vy",
             "p_xx", "p_yy", "p_vxvx", "p_vyvy", "misses", "age",
             "meas_rho", "meas_v", "meas_theta"]
        )
        for sid, t, trk, meas in rows:
            meas_cols = (
                [repr(meas.rho), repr(meas.v), repr(meas.theta)] if meas is not None else ["", "", ""]
            )
            writer.writerow(
                [sid, t, trk.track_id]
                + [repr(float(v)) for v in trk.state]
                + [repr(float(trk.cov[i, i])) for i in range(4)]
                + [trk.misses, trk.age]
                + meas_cols
            )


def write_knn_model(path: str, model: KnnModel) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# format={KNN_FORMAT}\n")
        fh.write(f"# k={model.k}\n")
        fh.write(f"# mean={_fmt(model.mean)}\n")
        fh.write(f"# std={_fmt(model.std)}\n")
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(model.features.shape[1])])
        for label, feat in zip(model.labels, model.features):
            writer.writerow([int(label)] + [repr(float(v)) for v in feat])


def read_knn_model(path: str) -> KnnModel:
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        else:
            body.append(line)
    if meta.get("format") != KNN_FORMAT:
        raise ValueError(f"{path}: unknown model format {meta.get('format')!r}")
    reader = csv.reader(body)
    next(reader)  # header
    labels, feats = [], []
    for row in reader:
        if not row:
            continue
        labels.append(int(row[0]))
        feats.append([float(v) for v in row[1:]])
    return KnnModel(
        features=np.array(feats),
        labels=np.array(labels, dtype=int),
        k=int(meta["k"]),
        mean=np.array([float(v) for v in meta["mean"].split(",")]),
        std=np.array([float(v) for v in meta["std"].split(",")]),
    )
