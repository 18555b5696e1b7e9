"""FMCW street-scene simulator.

Synthesizes raw IF radar frames for scenes of moving objects (cars, buses,
bikes, pedestrians) crossing a fixed mmWave link, and produces the per-frame
ground-truth blockage indicator used for labeling.

Conventions:
    * The radar sits at the origin, boresight along +x, receive ULA along y.
    * Scene coordinates are meters on the ground plane; all objects must stay
      in the front half-plane (x > 0).
    * One "frame" is ``num_rx x samples_per_chirp x chirps_per_chirp`` complex
      IF samples captured every ``frame_period`` seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Propagation constant; 3e8 keeps the derived quantities round (45.0 m
# unambiguous range under the default configuration).
C = 3.0e8

# Reference distance for the optional amplitude decay toggle.
DECAY_REF_M = 10.0


class AmbiguityError(ValueError):
    """Object violates the unambiguous range or velocity of the radar."""


@dataclass(frozen=True)
class RadarConfig:
    """Chirp, frame and array parameters of the FMCW radar.

    The chirp slope is derived (``bandwidth / chirp_duration``) so the slope
    invariant holds by construction.  Defaults follow a 77 GHz short-range
    automotive profile: 750 MHz sweep in 50 us (15 MHz/us), 128 chirps and
    256 samples per chirp, 4 RX antennas, 4.5 MHz ADC rate for a 45 m
    unambiguous range, and a 12 us inter-chirp idle giving ~15.7 m/s
    unambiguous velocity.  Frames arrive at 9 per second.
    """

    carrier_freq: float = 77e9
    bandwidth: float = 750e6
    chirp_duration: float = 50e-6
    idle_time: float = 12e-6
    frame_period: float = 1.0 / 9.0
    chirps_per_frame: int = 128
    samples_per_chirp: int = 256
    num_rx: int = 4
    sample_rate: float = 4.5e6
    antenna_spacing: float = 0.5  # in wavelengths

    def __post_init__(self):
        positive = {
            "carrier_freq": self.carrier_freq,
            "bandwidth": self.bandwidth,
            "chirp_duration": self.chirp_duration,
            "idle_time": self.idle_time,
            "frame_period": self.frame_period,
            "chirps_per_frame": self.chirps_per_frame,
            "samples_per_chirp": self.samples_per_chirp,
            "num_rx": self.num_rx,
            "sample_rate": self.sample_rate,
            "antenna_spacing": self.antenna_spacing,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        # ADC capture may spill past the chirp ramp but not into the next
        # chirp (small tolerance for floating round-off).
        capture = self.samples_per_chirp / self.sample_rate
        if capture > self.chirp_interval * (1 + 1e-9):
            raise ValueError(
                f"ADC capture time {capture:.3e}s exceeds chirp interval "
                f"{self.chirp_interval:.3e}s"
            )
        if self.chirps_per_frame * self.chirp_interval > self.frame_period * (1 + 1e-9):
            raise ValueError("chirps do not fit in one frame period")

    @property
    def chirp_slope(self) -> float:
        """Hz per second."""
        return self.bandwidth / self.chirp_duration

    @property
    def chirp_interval(self) -> float:
        """Chirp-to-chirp spacing: ramp plus idle (s)."""
        return self.chirp_duration + self.idle_time

    @property
    def wavelength(self) -> float:
        return C / self.carrier_freq

    @property
    def max_range(self) -> float:
        """Unambiguous range: beat frequency at Nyquist (m)."""
        return self.sample_rate * C / (2.0 * self.chirp_slope)

    @property
    def max_velocity(self) -> float:
        """Unambiguous radial velocity (m/s), one-sided."""
        return self.wavelength / (4.0 * self.chirp_interval)


@dataclass(frozen=True)
class SceneObject:
    """A moving object with a piecewise-linear 2D trajectory.

    ``waypoints`` is a sequence of (time_s, x_m, y_m); times strictly
    increasing.  ``rcs_gain`` scales the echo amplitude, ``extent`` is the
    disk radius used for blockage geometry.
    """

    obj_id: int
    waypoints: tuple
    rcs_gain: float = 1.0
    extent: float = 0.5

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ValueError("at least one waypoint required")
        times = [w[0] for w in self.waypoints]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        if self.rcs_gain <= 0:
            raise ValueError("rcs_gain must be positive")
        if self.extent < 0:
            raise ValueError("extent must be non-negative")

    def position_velocity(self, time: float):
        """Linear interpolation at ``time``; None outside the waypoint span."""
        times = [w[0] for w in self.waypoints]
        if time < times[0] or time > times[-1]:
            return None
        if len(self.waypoints) == 1:
            _, x, y = self.waypoints[0]
            return np.array([x, y]), np.zeros(2)
        # Segment containing `time`; the final instant uses the last segment.
        i = min(np.searchsorted(times, time, side="right") - 1, len(times) - 2)
        i = max(i, 0)
        t0, x0, y0 = self.waypoints[i]
        t1, x1, y1 = self.waypoints[i + 1]
        frac = (time - t0) / (t1 - t0)
        pos = np.array([x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)])
        vel = np.array([(x1 - x0) / (t1 - t0), (y1 - y0) / (t1 - t0)])
        return pos, vel


@dataclass(frozen=True)
class LinkModel:
    """Effective scalar power model of the mmWave link.

    The LOS and NLOS magnitudes are effective (post-beamforming) gains; the
    labeling threshold must separate the blocked power ``h_nlos**2`` from the
    unblocked power ``(h_los + h_nlos)**2``.
    """

    tx: tuple = (0.0, 0.0)
    rx: tuple = (20.0, 0.0)
    h_los: float = 1.0
    h_nlos: float = 0.05
    power_threshold: float = 0.5

    def __post_init__(self):
        if not (self.h_los > self.h_nlos >= 0):
            raise ValueError("require h_los > h_nlos >= 0")
        lo = self.h_nlos**2
        hi = (self.h_los + self.h_nlos) ** 2
        if not (lo < self.power_threshold < hi):
            raise ValueError(
                f"power_threshold must lie in ({lo:.4g}, {hi:.4g}), "
                f"got {self.power_threshold}"
            )


@dataclass
class RadarFrameCube:
    """One raw radar measurement: complex IF samples, antennas x samples x chirps."""

    samples: np.ndarray
    timestamp: int = 0

    def __post_init__(self):
        if self.samples.ndim != 3:
            raise ValueError("frame must be 3D (antennas, samples, chirps)")
        if not np.all(np.isfinite(self.samples.view(float))):
            raise ValueError("frame contains non-finite samples")


def step_scene(objects: Sequence[SceneObject], frame_index: int, frame_period: float):
    """Evaluate every object trajectory at ``frame_index * frame_period``.

    Returns a list of (object, position, velocity); objects whose waypoint
    span does not contain the query time are omitted.
    """
    time = frame_index * frame_period
    states = []
    for obj in objects:
        pv = obj.position_velocity(time)
        if pv is not None:
            states.append((obj, pv[0], pv[1]))
    return states


def point_segment_distance(point, seg_a, seg_b) -> float:
    """Euclidean distance from ``point`` to the segment ``seg_a``-``seg_b``."""
    p = np.asarray(point, dtype=float)
    a = np.asarray(seg_a, dtype=float)
    b = np.asarray(seg_b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a)))
    frac = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    closest = a + frac * ab
    return float(np.hypot(*(p - closest)))


def blockage_indicator(object_states, link: LinkModel) -> int:
    """1 iff any object's disk (center, extent) touches the TX-RX segment."""
    for obj, pos, _vel in object_states:
        if point_segment_distance(pos, link.tx, link.rx) <= obj.extent:
            return 1
    return 0


def effective_power(blocked: int, link: LinkModel) -> float:
    """Received link power ``|(1 - b) h_los + h_nlos|**2`` (linear)."""
    return float(((1 - blocked) * link.h_los + link.h_nlos) ** 2)


def synth_frame(
    object_states,
    radar_config: RadarConfig,
    noise_sigma: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    timestamp: int = 0,
    range_decay: bool = False,
) -> RadarFrameCube:
    """Synthesize one raw IF frame as the superposition of object echoes.

    Per object the IF sample at antenna m, fast-time index n, chirp l is

        a * exp(j 2 pi [mu tau n / f_s + f_c tau - mu/2 tau^2])
          * exp(j 2 pi m spacing sin(theta))

    with the round-trip delay tau recomputed per chirp from the radial
    velocity (stop-and-hop).  Circular Gaussian noise with total complex
    variance ``noise_sigma**2`` is added per sample.  Deterministic for a
    given ``rng``.

    Raises AmbiguityError if any object lies beyond the unambiguous range or
    moves faster than the unambiguous radial velocity.
    """
    cfg = radar_config
    shape = (cfg.num_rx, cfg.samples_per_chirp, cfg.chirps_per_frame)
    cube = np.zeros(shape, dtype=np.complex128)
    n = np.arange(cfg.samples_per_chirp)
    l = np.arange(cfg.chirps_per_frame)
    mu = cfg.chirp_slope

    for obj, pos, vel in object_states:
        d = float(np.hypot(pos[0], pos[1]))
        if d >= cfg.max_range:
            raise AmbiguityError(
                f"object {obj.obj_id} at range {d:.2f} m exceeds the "
                f"unambiguous range {cfg.max_range:.2f} m"
            )
        if d == 0.0:
            raise AmbiguityError(f"object {obj.obj_id} is at the radar position")
        v_r = float((pos @ vel) / d)
        if abs(v_r) >= cfg.max_velocity:
            raise AmbiguityError(
                f"object {obj.obj_id} radial velocity {v_r:.2f} m/s exceeds "
                f"the unambiguous velocity {cfg.max_velocity:.2f} m/s"
            )
        theta = math.atan2(pos[1], pos[0])
        amp = obj.rcs_gain
        if range_decay:
            amp *= (DECAY_REF_M / d) ** 2
        # Round-trip delay per chirp; range migration within the chirp is
        # below a range bin under any valid configuration.
        tau = 2.0 * (d + v_r * l * cfg.chirp_interval) / C  # (L,)
        phase = (
            mu * tau[None, :] * (n[:, None] / cfg.sample_rate)
            + cfg.carrier_freq * tau[None, :]
            - 0.5 * mu * tau[None, :] ** 2
        )
        echo = amp * np.exp(2j * np.pi * phase)  # (S, L)
        steering = np.exp(
            2j * np.pi * cfg.antenna_spacing * math.sin(theta) * np.arange(cfg.num_rx)
        )
        cube += steering[:, None, None] * echo[None, :, :]

    if noise_sigma > 0.0:
        if rng is None:
            raise ValueError("rng required when noise_sigma > 0")
        noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        cube += (noise_sigma / math.sqrt(2.0)) * noise

    return RadarFrameCube(samples=cube, timestamp=timestamp)


# ---------------------------------------------------------------------------
# Scenario generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Archetype:
    """Speed / size / echo-strength ranges for one object class."""

    name: str
    speed: tuple  # (min, max) m/s
    extent: tuple  # (min, max) m radius
    rcs: tuple  # (min, max) echo amplitude
    weight: float = 1.0


DEFAULT_ARCHETYPES = (
    Archetype("pedestrian", speed=(1.0, 2.0), extent=(0.25, 0.35), rcs=(0.15, 0.30)),
    Archetype("bicycle", speed=(3.0, 7.0), extent=(0.40, 0.70), rcs=(0.25, 0.50)),
    Archetype("car", speed=(6.0, 14.0), extent=(1.60, 2.40), rcs=(0.80, 1.60)),
    Archetype("bus", speed=(5.0, 10.0), extent=(3.50, 5.50), rcs=(1.50, 3.00)),
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Street-crossing scenario: one blocker per sequence plus distractors.

    The blocker crosses the TX-RX segment on a straight north-south path at
    ``cross_x``; distractors travel along the road beyond the receiver and
    never touch the link.  Sequences are trimmed to ``pre_frames`` unblocked
    frames followed by ``post_frames`` frames starting at the first blocked
    frame.
    """

    radar: RadarConfig = field(default_factory=RadarConfig)
    link: LinkModel = field(default_factory=LinkModel)
    archetypes: tuple = DEFAULT_ARCHETYPES
    cross_x: tuple = (5.0, 15.0)
    distractor_lane_x: tuple = (26.0, 32.0)
    distractor_span: float = 15.0
    num_distractors: tuple = (0, 2)
    visibility_margin: float = 3.0  # keep objects this far inside max_range
    noise_sigma: float = 0.02
    pre_frames: int = 36
    post_frames: int = 10
    range_decay: bool = False
    max_resample: int = 50

    @property
    def num_frames(self) -> int:
        return self.pre_frames + self.post_frames


@dataclass
class BlockageSequence:
    """One trimmed blockage episode.

    ``blocked`` is the per-frame ground-truth indicator, ``truth`` holds the
    present objects' (id, position, velocity) per frame, ``frames`` the raw
    radar measurements (None when synthesis was skipped).
    """

    seq_id: int
    blocked: np.ndarray
    truth: list
    objects: tuple
    frames: Optional[list] = None

    @property
    def onset(self) -> int:
        return int(np.argmax(self.blocked))

    def __len__(self) -> int:
        return len(self.blocked)


def _sample_archetype(archetypes, rng):
    weights = np.array([a.weight for a in archetypes], dtype=float)
    idx = rng.choice(len(archetypes), p=weights / weights.sum())
    return archetypes[idx]


def _uniform(rng, lo_hi):
    lo, hi = lo_hi
    return float(rng.uniform(lo, hi))


def _make_blocker(scenario: ScenarioConfig, rng, obj_id: int) -> SceneObject:
    """Blocker crossing the link with blockage onset inside frame pre_frames."""
    cfg = scenario
    arch = _sample_archetype(cfg.archetypes, rng)
    speed = _uniform(rng, arch.speed)
    extent = _uniform(rng, arch.extent)
    rcs = _uniform(rng, arch.rcs)
    x = _uniform(rng, cfg.cross_x)
    direction = 1.0 if rng.random() < 0.5 else -1.0
    tau_f = cfg.radar.frame_period

    # Place the crossing so the first frame instant with |y| <= extent is
    # frame pre_frames (sub-frame phase randomized).
    t_onset = (cfg.pre_frames - 1 + rng.uniform(0.05, 0.95)) * tau_f
    # Visible span: keep the path inside max_range minus a safety margin.
    r_vis = cfg.radar.max_range - cfg.visibility_margin
    y_vis = math.sqrt(max(r_vis**2 - x**2, 1.0))

    def y_at(t):
        return direction * (-extent + speed * (t - t_onset))

    # Clip the waypoint span to the visibility window and to the episode.
    t_seen_start = t_onset - (y_vis - extent) / speed
    t_seen_end = t_onset + (y_vis + extent) / speed
    t_start = max(0.0, t_seen_start)
    t_end = min((cfg.num_frames + 1) * tau_f, t_seen_end)
    waypoints = (
        (t_start, x, y_at(t_start)),
        (t_end, x, y_at(t_end)),
    )
    return SceneObject(obj_id=obj_id, waypoints=waypoints, rcs_gain=rcs, extent=extent)


def _make_distractor(scenario: ScenarioConfig, rng, obj_id: int) -> SceneObject:
    """Road user beyond the receiver, parallel to the blocker lanes."""
    cfg = scenario
    arch = _sample_archetype(cfg.archetypes, rng)
    speed = _uniform(rng, arch.speed)
    extent = _uniform(rng, arch.extent)
    rcs = _uniform(rng, arch.rcs)
    x = _uniform(rng, cfg.distractor_lane_x)
    direction = 1.0 if rng.random() < 0.5 else -1.0
    span = cfg.distractor_span
    y0 = float(rng.uniform(-span, span))
    tau_f = cfg.radar.frame_period
    duration = (cfg.num_frames + 1) * tau_f
    # Bounce the endpoint back inside the span so the object stays visible.
    y1 = y0 + direction * speed * duration
    if abs(y1) > span:
        y1 = math.copysign(span, y1)
        duration = abs(y1 - y0) / speed
        if duration <= tau_f:  # degenerate start near the edge: flip
            direction = -direction
            y1 = y0 + direction * speed * (cfg.num_frames + 1) * tau_f
            y1 = float(np.clip(y1, -span, span))
            duration = abs(y1 - y0) / speed
    waypoints = ((0.0, x, y0), (duration, x, y1))
    return SceneObject(obj_id=obj_id, waypoints=waypoints, rcs_gain=rcs, extent=extent)


def _sequence_truth(objects, scenario: ScenarioConfig):
    """Per-frame blockage bits and present-object states for one candidate."""
    cfg = scenario
    blocked = np.zeros(cfg.num_frames, dtype=bool)
    truth = []
    for k in range(cfg.num_frames):
        states = step_scene(objects, k, cfg.radar.frame_period)
        blocked[k] = bool(blockage_indicator(states, cfg.link))
        truth.append(states)
    return blocked, truth


def _valid_candidate(blocked, truth, scenario: ScenarioConfig) -> bool:
    cfg = scenario
    onsets = np.flatnonzero(np.diff(np.concatenate(([0], blocked.view(np.int8)))) == 1)
    if len(onsets) != 1 or onsets[0] != cfg.pre_frames:
        return False
    for states in truth:
        for _obj, pos, vel in states:
            d = float(np.hypot(pos[0], pos[1]))
            if d >= cfg.radar.max_range or pos[0] <= 0:
                return False
            v_r = abs(float(pos @ vel) / d)
            if v_r >= cfg.radar.max_velocity:
                return False
    return True


def generate_sequence(
    scenario: ScenarioConfig,
    seed,
    seq_id: int = 0,
    with_frames: bool = True,
) -> BlockageSequence:
    """Generate one trimmed blockage sequence, reproducible from ``seed``.

    Trajectory sampling and frame noise use independent child streams of the
    seed, so the trajectories (and labels) are identical whether or not raw
    frames are synthesized.
    """
    cfg = scenario
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    traj_ss, noise_ss = ss.spawn(2)
    traj_rng = np.random.default_rng(traj_ss)

    blocked = truth = objects = None
    for _attempt in range(cfg.max_resample):
        blocker = _make_blocker(cfg, traj_rng, obj_id=0)
        n_distract = int(traj_rng.integers(cfg.num_distractors[0], cfg.num_distractors[1] + 1))
        distractors = [_make_distractor(cfg, traj_rng, obj_id=i + 1) for i in range(n_distract)]
        candidate = (blocker, *distractors)
        blocked, truth = _sequence_truth(candidate, cfg)
        if _valid_candidate(blocked, truth, cfg):
            objects = candidate
            break
    else:
        raise RuntimeError(
            f"no valid blockage trajectory after {cfg.max_resample} resamples; "
            "check the scenario geometry"
        )

    frames = None
    if with_frames:
        noise_rng = np.random.default_rng(noise_ss)
        frames = [
            synth_frame(
                truth[k],
                cfg.radar,
                noise_sigma=cfg.noise_sigma,
                rng=noise_rng,
                timestamp=k,
                range_decay=cfg.range_decay,
            )
            for k in range(cfg.num_frames)
        ]

    return BlockageSequence(
        seq_id=seq_id, blocked=blocked, truth=truth, objects=objects, frames=frames
    )


def generate_dataset(
    scenario: ScenarioConfig,
    n_sequences: int,
    seed: int,
    with_frames: bool = True,
):
    """Generate ``n_sequences`` independent sequences from one master seed."""
    children = np.random.SeedSequence(seed).spawn(n_sequences)
    return [
        generate_sequence(scenario, child, seq_id=i, with_frames=with_frames)
        for i, child in enumerate(children)
    ]
