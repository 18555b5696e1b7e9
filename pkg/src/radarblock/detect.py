"""Target detection on range-velocity maps.

2D cell-averaging CFAR flags cells above a scaled local-mean threshold,
DBSCAN groups the flagged cells into candidate objects, and per-cluster
range / velocity / angle measurements are read back out of the radar cube.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dsp import RadarCube


def cfar_alpha(train: Tuple[int, int], guard: Tuple[int, int], p_fa: float) -> float:
    """Threshold multiplier for a design false-alarm rate.

    Uses the textbook cell-averaging relation ``alpha = N (P_fa^(-1/N) - 1)``
    with N the full training-ring cell count (exact for exponential-power
    noise away from map edges).
    """
    n = _ring_cell_count(train, guard)
    return n * (p_fa ** (-1.0 / n) - 1.0)


def _ring_cell_count(train, guard) -> int:
    outer = (2 * (train[0] + guard[0]) + 1) * (2 * (train[1] + guard[1]) + 1)
    inner = (2 * guard[0] + 1) * (2 * guard[1] + 1)
    return outer - inner


@dataclass(frozen=True)
class CfarConfig:
    """Cell-averaging CFAR window.

    ``train`` and ``guard`` are per-axis half-window sizes (range, velocity);
    the training ring spans ``train`` cells beyond the guard box on each
    side.  ``alpha`` defaults to the value giving the design ``p_fa`` on
    exponential noise.
    """

    train: Tuple[int, int] = (8, 4)
    guard: Tuple[int, int] = (2, 1)
    alpha: Optional[float] = None
    p_fa: float = 1e-3

    def __post_init__(self):
        for t, g in zip(self.train, self.guard):
            if not (t > g >= 0):
                raise ValueError(f"require train > guard >= 0 per axis, got {self.train}, {self.guard}")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.p_fa < 1:
            raise ValueError("p_fa must be in (0, 1)")

    @property
    def resolved_alpha(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return cfar_alpha(self.train, self.guard, self.p_fa)


@dataclass(frozen=True)
class Detection:
    """One CFAR-flagged map cell."""

    range_bin: int
    velocity_bin: int
    magnitude: float


@dataclass
class Cluster:
    """A DBSCAN group of detections forming one candidate object."""

    cluster_id: int
    detections: List[Detection]

    def __post_init__(self):
        if not self.detections:
            raise ValueError("cluster must be non-empty")
        cells = [(d.range_bin, d.velocity_bin) for d in self.detections]
        if len(set(cells)) != len(cells):
            raise ValueError("cluster members must be unique cells")


@dataclass(frozen=True)
class ObjectMeasurement:
    """Range (m), radial velocity (m/s) and angle (rad) of one object."""

    rho: float
    v: float
    theta: float

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("range must be non-negative")
        if abs(self.theta) > math.pi / 2 + 1e-12:
            raise ValueError("angle outside +-pi/2")

    def as_vector(self) -> np.ndarray:
        return np.array([self.rho, self.v, self.theta])


def _box_sum(arr: np.ndarray, half: Tuple[int, int]) -> np.ndarray:
    """Sum over a clipped (2a+1) x (2b+1) window centered at each cell."""
    a, b = half
    h, w = arr.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.float64)
    ii[1:, 1:] = np.cumsum(np.cumsum(arr, axis=0), axis=1)
    r = np.arange(h)
    c = np.arange(w)
    r0 = np.clip(r - a, 0, h)[:, None]
    r1 = np.clip(r + a + 1, 0, h)[:, None]
    c0 = np.clip(c - b, 0, w)[None, :]
    c1 = np.clip(c + b + 1, 0, w)[None, :]
    return ii[r1, c1] - ii[r0, c1] - ii[r1, c0] + ii[r0, c0]


def _box_count(shape, half) -> np.ndarray:
    """In-bounds cell count of the clipped window (exact integers)."""
    a, b = half
    h, w = shape
    r = np.arange(h)
    c = np.arange(w)
    rows = np.minimum(r + a, h - 1) - np.maximum(r - a, 0) + 1
    cols = np.minimum(c + b, w - 1) - np.maximum(c - b, 0) + 1
    return rows[:, None] * cols[None, :]


def cfar_2d(map_data: np.ndarray, config: CfarConfig = CfarConfig()):
    """Cell-averaging CFAR over a 2D map.

    A cell is flagged iff its value exceeds ``alpha`` times the mean of the
    training ring (outer window minus guard box).  At map edges the window
    is truncated and the mean taken over the available cells.

    Returns (binary map, detections); detections are listed in row-major
    scan order.  Raises if the full window does not fit in the map.
    """
    m = np.asarray(map_data, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("map must be 2D")
    outer = (config.train[0] + config.guard[0], config.train[1] + config.guard[1])
    if m.shape[0] <= 2 * outer[0] + 1 or m.shape[1] <= 2 * outer[1] + 1:
        raise ValueError(
            f"map shape {m.shape} too small for CFAR window {2 * outer[0] + 1} x {2 * outer[1] + 1}"
        )

    ring_sum = _box_sum(m, outer) - _box_sum(m, config.guard)
    ring_count = _box_count(m.shape, outer) - _box_count(m.shape, config.guard)
    threshold = config.resolved_alpha * ring_sum / ring_count
    binary = m > threshold

    detections = [
        Detection(range_bin=int(i), velocity_bin=int(j), magnitude=float(m[i, j]))
        for i, j in np.argwhere(binary)
    ]
    return binary, detections


def dbscan(
    points: np.ndarray,
    eps: float,
    min_pts: int,
    scale: Tuple[float, float] = (1.0, 1.0),
) -> np.ndarray:
    """Density-based clustering of detection cells; returns labels (-1 = noise).

    Core points have at least ``min_pts`` neighbors within ``eps`` (the point
    itself included); clusters are the connected components of core points,
    numbered by first core point in input order.  A border point joins the
    cluster of its nearest core neighbor; exact distance ties go to the core
    point with the lexicographically smallest scaled coordinates, which makes
    the partition independent of input order.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    pts = np.asarray(points, dtype=np.float64)
    if pts.size == 0:
        return np.empty(0, dtype=int)
    if pts.ndim != 2:
        raise ValueError("points must be (n, d)")
    x = pts * np.asarray(scale, dtype=np.float64)[None, : pts.shape[1]]

    n = len(x)
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    neighbors = d2 <= eps * eps
    core = neighbors.sum(axis=1) >= min_pts

    labels = np.full(n, -1, dtype=int)
    cluster_id = 0
    for start in range(n):
        if not core[start] or labels[start] != -1:
            continue
        # Flood the core component.
        stack = [start]
        labels[start] = cluster_id
        while stack:
            p = stack.pop()
            for q in np.flatnonzero(neighbors[p] & core):
                if labels[q] == -1:
                    labels[q] = cluster_id
                    stack.append(q)
        cluster_id += 1

    # Border points: nearest core neighbor, coordinate-lexicographic ties.
    core_idx = np.flatnonzero(core)
    for p in range(n):
        if labels[p] != -1 or len(core_idx) == 0:
            continue
        within = core_idx[d2[p, core_idx] <= eps * eps]
        if len(within) == 0:
            continue
        dists = d2[p, within]
        ties = within[dists == dists.min()]
        winner = min(ties, key=lambda q: tuple(x[q]))
        labels[p] = labels[winner]
    return labels


def cluster_detections(
    detections: Sequence[Detection],
    eps: float = 3.0,
    min_pts: int = 3,
    scale: Tuple[float, float] = (1.0, 1.0),
) -> List[Cluster]:
    """CFAR detections -> DBSCAN clusters (noise detections dropped)."""
    if not detections:
        return []
    pts = np.array([(d.range_bin, d.velocity_bin) for d in detections], dtype=float)
    labels = dbscan(pts, eps=eps, min_pts=min_pts, scale=scale)
    clusters = []
    for cid in sorted(set(labels) - {-1}):
        members = [d for d, lab in zip(detections, labels) if lab == cid]
        clusters.append(Cluster(cluster_id=int(cid), detections=members))
    return clusters


def extract_measurement(cluster: Cluster, cube: RadarCube) -> ObjectMeasurement:
    """Range/velocity as the average over member cells, angle via the peak
    of the angle profile summed over the cluster's (range, velocity) cells."""
    r_bins = np.array([d.range_bin for d in cluster.detections])
    v_bins = np.array([d.velocity_bin for d in cluster.detections])
    rho = float(cube.range_axis[r_bins].mean())
    v = float(cube.velocity_axis[v_bins].mean())
    profile = np.abs(cube.data[:, r_bins, v_bins]).sum(axis=1)
    theta = float(cube.angle_axis[int(np.argmax(profile))])
    return ObjectMeasurement(rho=rho, v=v, theta=theta)
