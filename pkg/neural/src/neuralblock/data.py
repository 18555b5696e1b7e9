"""Loading the radar lane's range-angle export into training windows.

The export directory contains ``maps/seqNNNN_fKKK.bin`` (float32 range x
angle maps with text headers), ``ra_manifest.csv`` (one row per frame),
``ra_samples.csv`` (seq_id, frame_index, label, split) and ``ra_header.txt``
with the map shape and window lengths.  Maps are normalized per map:
log-magnitude, then min-max to [0, 1].
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import torch
from torch.utils.data import Dataset


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


def normalize_map(arr: np.ndarray) -> np.ndarray:
    """Log magnitude then per-map min-max to [0, 1]."""
    out = np.log1p(np.maximum(arr.astype(np.float32), 0.0))
    lo = out.min()
    hi = out.max()
    if hi > lo:
        out = (out - lo) / (hi - lo)
    else:
        out = np.zeros_like(out)
    return out


@dataclass
class Sample:
    seq_id: int
    frame_index: int
    label: int
    split: str


class RaExport:
    """In-memory view of one export directory."""

    def __init__(self, root: str):
        self.root = root
        header = _read_kv(os.path.join(root, "ra_header.txt"))
        self.map_shape = tuple(int(v) for v in header["map_shape"].split(","))
        self.obs_window = int(header["obs_window"])
        self.pred_window = int(header["pred_window"])

        self.frames: Dict[Tuple[int, int], np.ndarray] = {}
        with open(os.path.join(root, "ra_manifest.csv"), newline="") as fh:
            for row in csv.DictReader(fh):
                key = (int(row["seq_id"]), int(row["frame_index"]))
                path = os.path.join(root, "maps", row["map_file"])
                raw = np.fromfile(path, dtype="<f4").reshape(self.map_shape)
                self.frames[key] = normalize_map(raw)

        self.samples: List[Sample] = []
        with open(os.path.join(root, "ra_samples.csv"), newline="") as fh:
            for row in csv.DictReader(fh):
                self.samples.append(
                    Sample(
                        seq_id=int(row["seq_id"]),
                        frame_index=int(row["frame_index"]),
                        label=int(row["label"]),
                        split=row["split"],
                    )
                )

    def split_samples(self, split: str) -> List[Sample]:
        return [s for s in self.samples if s.split == split]


class WindowDataset(Dataset):
    """Observation windows ending at each sample's frame."""

    def __init__(self, export: RaExport, samples: List[Sample]):
        self.export = export
        self.samples = samples
        for s in samples:
            if s.frame_index < export.obs_window - 1:
                raise ValueError(
                    f"sample (seq {s.seq_id}, frame {s.frame_index}) lacks a full "
                    f"{export.obs_window}-frame observation window"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, idx: int):
        s = self.samples[idx]
        t0 = s.frame_index - self.export.obs_window + 1
        maps = [self.export.frames[(s.seq_id, t)] for t in range(t0, s.frame_index + 1)]
        window = torch.from_numpy(np.stack(maps)[:, None, :, :])
        return window, torch.tensor(float(s.label))


def subsample(samples: List[Sample], stride: int) -> List[Sample]:
    """Every ``stride``-th sample per sequence (training-cost control)."""
    if stride <= 1:
        return list(samples)
    out = []
    per_seq: Dict[int, int] = {}
    for s in samples:
        k = per_seq.get(s.seq_id, 0)
        if k % stride == 0:
            out.append(s)
        per_seq[s.seq_id] = k + 1
    return out
