"""Multi-object tracking with constant-velocity Unscented Kalman filters.

Each track carries a state [x, y, v_x, v_y] in radar-centric Cartesian
coordinates.  Prediction is the (linear) constant-velocity model; the update
step passes sigma points through the nonlinear range / radial-velocity /
angle measurement map.  Frame-to-frame association is greedy one-to-one
nearest-pair matching on a weighted position + radial-velocity distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .detect import ObjectMeasurement

STATE_DIM = 4


def _default_process_noise() -> np.ndarray:
    return np.diag([0.05**2, 0.05**2, 0.5**2, 0.5**2])


def _default_meas_noise() -> np.ndarray:
    return np.diag([0.2**2, 0.3**2, 0.05**2])


@dataclass
class TrackState:
    """One tracked object: state mean, covariance, identity and bookkeeping."""

    state: np.ndarray
    cov: np.ndarray
    track_id: int
    misses: int = 0
    age: int = 0

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=np.float64).reshape(STATE_DIM)
        self.cov = np.asarray(self.cov, dtype=np.float64).reshape(STATE_DIM, STATE_DIM)
        if self.misses < 0:
            raise ValueError("misses must be non-negative")

    @property
    def position(self) -> np.ndarray:
        return self.state[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.state[2:]


@dataclass(frozen=True)
class UkfConfig:
    """Filter noise and sigma-point spread parameters."""

    process_noise: np.ndarray = field(default_factory=_default_process_noise)
    meas_noise: np.ndarray = field(default_factory=_default_meas_noise)
    alpha: float = 0.1
    beta: float = 2.0
    kappa: float = 0.0
    frame_period: float = 1.0 / 9.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.frame_period <= 0:
            raise ValueError("frame_period must be positive")
        for name, m in (("process_noise", self.process_noise), ("meas_noise", self.meas_noise)):
            arr = np.asarray(m, dtype=np.float64)
            if not np.allclose(arr, arr.T):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(arr).min() < -1e-12:
                raise ValueError(f"{name} must be positive semi-definite")


@dataclass(frozen=True)
class AssociationConfig:
    """Gating, distance weights, termination and spawn parameters."""

    w_pos: float = 1.0
    w_vel: float = 0.5
    gate: float = 3.0
    max_misses: int = 3
    spawn_tracks: bool = True
    spawn_pos_std: float = 0.5
    spawn_vel_std: float = 2.0

    def __post_init__(self):
        if self.w_pos < 0 or self.w_vel < 0 or (self.w_pos == 0 and self.w_vel == 0):
            raise ValueError("weights must be non-negative and not both zero")
        if self.gate <= 0:
            raise ValueError("gate must be positive")
        if self.max_misses < 1:
            raise ValueError("max_misses must be >= 1")


def cv_transition(dt: float) -> np.ndarray:
    """Constant-velocity transition matrix for state [x, y, v_x, v_y]."""
    f = np.eye(STATE_DIM)
    f[0, 2] = dt
    f[1, 3] = dt
    return f


def predict(track: TrackState, config: UkfConfig) -> TrackState:
    """Propagate mean and covariance one frame ahead (in place)."""
    f = cv_transition(config.frame_period)
    track.state = f @ track.state
    track.cov = f @ track.cov @ f.T + np.asarray(config.process_noise, dtype=np.float64)
    track.cov = _symmetrize(track.cov)
    return track


def measure(state: np.ndarray) -> np.ndarray:
    """Map a state to its (range, radial velocity, angle) measurement.

    Raises ValueError for a state at the radar position (singular).
    """
    x, y, vx, vy = np.asarray(state, dtype=np.float64).reshape(STATE_DIM)
    rho = math.hypot(x, y)
    if rho == 0.0:
        raise ValueError("measurement model singular at the origin")
    v = (x * vx + y * vy) / rho
    theta = math.atan2(y, x)
    return np.array([rho, v, theta])


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def _psd_repair(p: np.ndarray, floor: float = -1e-9) -> np.ndarray:
    """Clip tiny negative eigenvalues from round-off; raise on real violations."""
    p = _symmetrize(p)
    w, v = np.linalg.eigh(p)
    if w.min() < floor * max(1.0, abs(w).max()):
        raise np.linalg.LinAlgError(
            f"covariance lost positive semi-definiteness (min eig {w.min():.3e})"
        )
    if w.min() < 0:
        p = (v * np.maximum(w, 0.0)) @ v.T
        p = _symmetrize(p)
    return p


def _matrix_sqrt(p: np.ndarray) -> np.ndarray:
    """Cholesky factor, falling back to an eigen square root for singular PSD."""
    try:
        return np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(_symmetrize(p))
        return v @ np.diag(np.sqrt(np.maximum(w, 0.0)))


def sigma_points(
    mean: np.ndarray, cov: np.ndarray, alpha: float, beta: float, kappa: float
):
    """Scaled sigma points with mean and covariance weights.

    The 2n+1 points reproduce the source mean exactly and the covariance via
    the covariance weights (the defining unscented-transform property).
    """
    n = len(mean)
    lam = alpha**2 * (n + kappa) - n
    scale = n + lam
    root = _matrix_sqrt(scale * cov)
    points = np.tile(mean, (2 * n + 1, 1))
    points[1 : n + 1] += root.T
    points[n + 1 :] -= root.T
    w_mean = np.full(2 * n + 1, 1.0 / (2.0 * scale))
    w_cov = w_mean.copy()
    w_mean[0] = lam / scale
    w_cov[0] = lam / scale + (1.0 - alpha**2 + beta)
    return points, w_mean, w_cov


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def ukf_update(
    track: TrackState,
    measurement: np.ndarray,
    config: UkfConfig,
    meas_fn: Callable[[np.ndarray], np.ndarray] = measure,
    meas_noise: Optional[np.ndarray] = None,
    angle_index: Optional[int] = None,
) -> TrackState:
    """Unscented measurement update (in place).

    ``meas_fn`` and ``meas_noise`` are overridable so the update can be
    checked against the exact linear Kalman form.  ``angle_index`` marks a
    periodic measurement component whose residuals are wrapped to (-pi, pi].
    Raises on a non-invertible innovation covariance, reporting its
    conditioning.
    """
    y = np.asarray(measurement, dtype=np.float64).ravel()
    r = np.asarray(config.meas_noise if meas_noise is None else meas_noise, dtype=np.float64)

    chi, w_mean, w_cov = sigma_points(
        track.state, track.cov, config.alpha, config.beta, config.kappa
    )
    ys = np.array([meas_fn(p) for p in chi])
    y_pred = w_mean @ ys
    dy = ys - y_pred
    dx = chi - track.state
    if angle_index is not None:
        dy[:, angle_index] = _wrap_angle(dy[:, angle_index])
    s = (w_cov * dy.T) @ dy + r
    cross = (w_cov * dx.T) @ dy

    cond = np.linalg.cond(s)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(
            f"innovation covariance is not invertible (condition number {cond:.3e})"
        )
    gain = np.linalg.solve(s.T, cross.T).T
    innovation = y - y_pred
    if angle_index is not None:
        innovation[angle_index] = _wrap_angle(innovation[angle_index])
    track.state = track.state + gain @ innovation
    track.cov = _psd_repair(track.cov - gain @ s @ gain.T)
    return track


@dataclass
class Assignment:
    """Greedy association result (indices into the input lists)."""

    matches: List[Tuple[int, int]]
    unmatched_tracks: List[int]
    unmatched_measurements: List[int]


def _meas_position(m: ObjectMeasurement) -> np.ndarray:
    return np.array([m.rho * math.cos(m.theta), m.rho * math.sin(m.theta)])


def _track_radial_velocity(track: TrackState) -> float:
    rho = math.hypot(track.state[0], track.state[1])
    if rho == 0.0:
        return 0.0
    return float((track.state[:2] @ track.state[2:]) / rho)


def associate(
    tracks: Sequence[TrackState],
    measurements: Sequence[ObjectMeasurement],
    config: AssociationConfig,
) -> Assignment:
    """One-to-one greedy matching on w_pos * |dposition| + w_vel * |dv_radial|.

    Pairs are consumed in order of increasing distance (ties by track then
    measurement index); pairs beyond the gate stay unmatched.
    """
    pairs = []
    for i, trk in enumerate(tracks):
        p_t = trk.position
        v_t = _track_radial_velocity(trk)
        for j, m in enumerate(measurements):
            d = config.w_pos * float(np.hypot(*(p_t - _meas_position(m)))) + config.w_vel * abs(
                v_t - m.v
            )
            if d <= config.gate:
                pairs.append((d, i, j))
    pairs.sort()

    matches = []
    used_t, used_m = set(), set()
    for d, i, j in pairs:
        if i in used_t or j in used_m:
            continue
        matches.append((i, j))
        used_t.add(i)
        used_m.add(j)
    return Assignment(
        matches=matches,
        unmatched_tracks=[i for i in range(len(tracks)) if i not in used_t],
        unmatched_measurements=[j for j in range(len(measurements)) if j not in used_m],
    )


def spawn_track(
    measurement: ObjectMeasurement, config: AssociationConfig, track_id: int
) -> TrackState:
    """New track at the measured position; velocity is the radial projection."""
    pos = _meas_position(measurement)
    vel = measurement.v * np.array([math.cos(measurement.theta), math.sin(measurement.theta)])
    cov = np.diag(
        [
            config.spawn_pos_std**2,
            config.spawn_pos_std**2,
            config.spawn_vel_std**2,
            config.spawn_vel_std**2,
        ]
    )
    return TrackState(state=np.concatenate([pos, vel]), cov=cov, track_id=track_id)


def manage(
    tracks: Sequence[TrackState],
    measurements: Sequence[ObjectMeasurement],
    assignment: Assignment,
    ukf_config: UkfConfig,
    assoc_config: AssociationConfig,
    next_id: int,
) -> Tuple[List[TrackState], int]:
    """Apply one association round: update, age, terminate, spawn.

    Matched tracks get the UKF update and a miss reset; unmatched tracks keep
    their prediction and gain a miss, dropping out at ``max_misses``;
    unmatched measurements spawn fresh tracks.
    """
    matched = dict(assignment.matches)
    survivors: List[TrackState] = []
    for i, trk in enumerate(tracks):
        trk.age += 1
        if i in matched:
            ukf_update(
                trk,
                measurements[matched[i]].as_vector(),
                ukf_config,
                angle_index=2,
            )
            trk.misses = 0
            survivors.append(trk)
        else:
            trk.misses += 1
            if trk.misses < assoc_config.max_misses:
                survivors.append(trk)
    if assoc_config.spawn_tracks:
        for j in assignment.unmatched_measurements:
            survivors.append(spawn_track(measurements[j], assoc_config, next_id))
            next_id += 1
    return survivors, next_id


class Tracker:
    """Frame-by-frame multi-object tracker (single mutable track set)."""

    def __init__(
        self,
        ukf_config: Optional[UkfConfig] = None,
        assoc_config: Optional[AssociationConfig] = None,
    ):
        self.ukf_config = ukf_config or UkfConfig()
        self.assoc_config = assoc_config or AssociationConfig()
        self.tracks: List[TrackState] = []
        self._next_id = 0
        # track_id -> measurement that updated or spawned it this frame
        self.last_associations: dict = {}

    def step(self, measurements: Sequence[ObjectMeasurement]) -> List[TrackState]:
        """Advance one frame: predict, associate, update / terminate / spawn."""
        for trk in self.tracks:
            predict(trk, self.ukf_config)
        assignment = associate(self.tracks, measurements, self.assoc_config)
        self.last_associations = {
            self.tracks[i].track_id: measurements[j] for i, j in assignment.matches
        }
        spawn_from = self._next_id
        self.tracks, self._next_id = manage(
            self.tracks,
            measurements,
            assignment,
            self.ukf_config,
            self.assoc_config,
            self._next_id,
        )
        for trk in self.tracks:
            if trk.track_id >= spawn_from:
                self.last_associations[trk.track_id] = measurements[
                    assignment.unmatched_measurements[trk.track_id - spawn_from]
                ]
        return self.tracks
