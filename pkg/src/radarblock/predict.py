"""Supervised blockage-prediction samples and the k-NN classifier.

A sample pairs the stacked live-track states at frame t with the label
"any blockage within the next ``pred_window`` frames".  Splitting happens at
sequence granularity so test sequences are never seen in training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .tracking import STATE_DIM, TrackState

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class LabelConfig:
    """Observation and prediction window lengths in frames.

    The tracking pipeline keeps no observation buffer (tracks integrate all
    history), so ``obs_window`` only gates the first labeled frame; the
    neural lane uses it as its input window length.
    """

    obs_window: int = 1
    pred_window: int = 10

    def __post_init__(self):
        if self.obs_window < 1:
            raise ValueError("obs_window must be >= 1")
        if self.pred_window < 1:
            raise ValueError("pred_window must be >= 1")


def future_label(blocked: Sequence, t: int, pred_window: int) -> Optional[int]:
    """OR of the blockage bits over frames t+1 .. t+pred_window.

    Returns None when the window runs past the end of the sequence (the
    sample is skipped, not an error).
    """
    blocked = np.asarray(blocked)
    if t < 0 or t >= len(blocked):
        raise IndexError(f"frame {t} outside sequence of length {len(blocked)}")
    if t + pred_window > len(blocked) - 1:
        return None
    return int(np.any(blocked[t + 1 : t + pred_window + 1]))


def stack_states(tracks: Sequence[TrackState], max_tracks: int) -> np.ndarray:
    """Concatenate live track states nearest-range first, zero-padded.

    Tracks are ordered by range ascending (ties by track id); at most
    ``max_tracks`` are kept -- the nearest objects are the likeliest
    blockers.  Output length is exactly ``4 * max_tracks``.
    """
    if max_tracks < 1:
        raise ValueError("max_tracks must be >= 1")
    ordered = sorted(
        tracks, key=lambda trk: (math.hypot(trk.state[0], trk.state[1]), trk.track_id)
    )[:max_tracks]
    out = np.zeros(STATE_DIM * max_tracks)
    for i, trk in enumerate(ordered):
        out[i * STATE_DIM : (i + 1) * STATE_DIM] = trk.state
    return out


def split_sequences(
    seq_ids: Sequence[int],
    ratios=(0.7, 0.2, 0.1),
    seed: int = 0,
) -> Dict[int, str]:
    """Assign whole sequences to train/val/test with nearest-count rounding."""
    n = len(seq_ids)
    if n < 10:
        raise ValueError(f"need at least 10 sequences to split, got {n}")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be three non-negative values summing to 1")
    order = np.random.default_rng(seed).permutation(n)
    n_train = round(ratios[0] * n)
    n_val = round(ratios[1] * n)
    assignment = {}
    for rank, idx in enumerate(order):
        if rank < n_train:
            split = "train"
        elif rank < n_train + n_val:
            split = "val"
        else:
            split = "test"
        assignment[seq_ids[idx]] = split
    return assignment


@dataclass
class LabeledSample:
    """One supervised sample with its provenance."""

    features: np.ndarray
    label: int
    seq_id: int
    frame_index: int
    split: str


def build_samples(
    states_per_frame: Sequence[Sequence[TrackState]],
    blocked: Sequence,
    label_config: LabelConfig,
    max_tracks: int,
    seq_id: int,
    split: str,
) -> List[LabeledSample]:
    """Samples for one tracked sequence; frames without a full future window
    or before ``obs_window - 1`` are skipped."""
    samples = []
    for t in range(label_config.obs_window - 1, len(blocked)):
        label = future_label(blocked, t, label_config.pred_window)
        if label is None:
            continue
        samples.append(
            LabeledSample(
                features=stack_states(states_per_frame[t], max_tracks),
                label=label,
                seq_id=seq_id,
                frame_index=t,
                split=split,
            )
        )
    return samples


@dataclass
class KnnModel:
    """k-nearest-neighbor classifier over z-scored feature vectors."""

    features: np.ndarray  # standardized, (n, d)
    labels: np.ndarray  # (n,)
    k: int
    mean: np.ndarray
    std: np.ndarray


def knn_fit(features: np.ndarray, labels: Sequence[int], k: int = 5) -> KnnModel:
    """Store the training set with per-dimension standardization.

    ``k`` must be odd (vote ties impossible) and at most the training size.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("features must be (n, d) with one label per row")
    if len(x) == 0:
        raise ValueError("training set is empty")
    if k % 2 == 0:
        raise ValueError("k must be odd")
    if k > len(x):
        raise ValueError(f"k={k} exceeds training size {len(x)}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    return KnnModel(features=(x - mean) / std, labels=y, k=k, mean=mean, std=std)


def knn_scores(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    """Fraction of positive labels among the k nearest training points.

    Distance ties are broken toward the lower training index (stable sort),
    so scores are deterministic.  Accepts a single feature vector or a
    batch; raises on dimension mismatch.
    """
    q = np.asarray(queries, dtype=np.float64)
    single = q.ndim == 1
    if single:
        q = q[None, :]
    if q.shape[1] != model.features.shape[1]:
        raise ValueError(
            f"feature dimension {q.shape[1]} does not match model {model.features.shape[1]}"
        )
    qz = (q - model.mean) / model.std
    d2 = ((qz[:, None, :] - model.features[None, :, :]) ** 2).sum(axis=-1)
    nearest = np.argsort(d2, axis=1, kind="stable")[:, : model.k]
    scores = model.labels[nearest].mean(axis=1)
    return scores[0] if single else scores


def knn_predict(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    """Majority vote of the k Euclidean-nearest training points (k odd)."""
    scores = knn_scores(model, queries)
    return (np.asarray(scores) > 0.5).astype(int) if np.ndim(scores) else int(scores > 0.5)
