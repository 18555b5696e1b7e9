"""Radar cube formation and 2D map projections.

A raw frame (antennas x samples x chirps) is transformed with three
zero-padded FFTs: fast-time samples -> range, chirps -> Doppler velocity,
antennas -> angle.  The Doppler and angle axes are fftshift-centered so zero
velocity / boresight sit at the middle bin; the range axis is left one-sided.

Transforms are unnormalized (plain forward FFT), so the cube energy equals
the frame energy times ``n_range * n_doppler * n_angle`` under rectangular
windows (Parseval with zero padding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .sim import C, RadarConfig, RadarFrameCube

_WINDOWS = ("rect", "hann")


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FftConfig:
    """FFT sizes and per-axis taper for cube formation.

    Sizes must be powers of two and at least the corresponding frame
    dimension (zero padding).  Windows apply to the occupied part of each
    axis before padding; default is rectangular everywhere.
    """

    n_range: int = 256
    n_doppler: int = 128
    n_angle: int = 64
    window_range: str = "rect"
    window_doppler: str = "rect"
    window_angle: str = "rect"

    def __post_init__(self):
        for name, n in (
            ("n_range", self.n_range),
            ("n_doppler", self.n_doppler),
            ("n_angle", self.n_angle),
        ):
            if not _is_pow2(n):
                raise ValueError(f"{name} must be a power of two, got {n}")
        for name, w in (
            ("window_range", self.window_range),
            ("window_doppler", self.window_doppler),
            ("window_angle", self.window_angle),
        ):
            if w not in _WINDOWS:
                raise ValueError(f"{name} must be one of {_WINDOWS}, got {w!r}")


@dataclass
class RadarCube:
    """3D FFT of one frame with physical axis maps.

    ``data`` has shape (n_angle, n_range, n_doppler); ``angle_axis`` (rad),
    ``range_axis`` (m) and ``velocity_axis`` (m/s) map bins to physical
    values and are monotonically increasing.
    """

    data: np.ndarray
    angle_axis: np.ndarray
    range_axis: np.ndarray
    velocity_axis: np.ndarray


@dataclass
class RangeVelocityMap:
    """Non-negative magnitude map, angle axis summed out; shape (n_range, n_doppler)."""

    data: np.ndarray
    range_axis: np.ndarray
    velocity_axis: np.ndarray


@dataclass
class RangeAngleMap:
    """Non-negative magnitude map, Doppler axis summed out; shape (n_range, n_angle)."""

    data: np.ndarray
    range_axis: np.ndarray
    angle_axis: np.ndarray


def _axis_values(axis: str, bins: np.ndarray, radar: RadarConfig, fft: FftConfig):
    if axis == "range":
        return bins * C * radar.sample_rate / (2.0 * radar.chirp_slope * fft.n_range)
    if axis == "velocity":
        return (bins - fft.n_doppler // 2) * radar.wavelength / (
            2.0 * fft.n_doppler * radar.chirp_interval
        )
    if axis == "angle":
        return np.arcsin(2.0 * (bins - fft.n_angle // 2) / fft.n_angle)
    raise ValueError(f"unknown axis {axis!r}")


def bin_to_physical(
    axis: str, bin_index: int, radar: RadarConfig, fft: FftConfig
) -> float:
    """Map a bin index on ``axis`` ('range' | 'velocity' | 'angle') to m, m/s or rad."""
    sizes = {"range": fft.n_range, "velocity": fft.n_doppler, "angle": fft.n_angle}
    if axis not in sizes:
        raise ValueError(f"unknown axis {axis!r}")
    if not 0 <= bin_index < sizes[axis]:
        raise IndexError(f"{axis} bin {bin_index} outside [0, {sizes[axis]})")
    return float(_axis_values(axis, np.asarray(bin_index, dtype=float), radar, fft))


def axis_array(axis: str, radar: RadarConfig, fft: FftConfig) -> np.ndarray:
    """Physical values for every bin of ``axis``."""
    sizes = {"range": fft.n_range, "velocity": fft.n_doppler, "angle": fft.n_angle}
    if axis not in sizes:
        raise ValueError(f"unknown axis {axis!r}")
    return _axis_values(axis, np.arange(sizes[axis], dtype=float), radar, fft)


def _window(kind: str, n: int):
    if kind == "hann":
        return np.hanning(n)
    return None


def radar_cube(
    frame: RadarFrameCube,
    radar: RadarConfig,
    fft: Optional[FftConfig] = None,
) -> RadarCube:
    """Form the radar cube from one raw frame.

    Axis order of the result is (angle, range, doppler).  The input dtype is
    preserved (complex64 input stays single precision throughout).
    """
    fft = fft or FftConfig()
    x = frame.samples
    expected = (radar.num_rx, radar.samples_per_chirp, radar.chirps_per_frame)
    if x.shape != expected:
        raise ValueError(f"frame shape {x.shape} does not match config {expected}")
    if fft.n_range < expected[1] or fft.n_doppler < expected[2] or fft.n_angle < expected[0]:
        raise ValueError("FFT sizes must be >= frame dimensions")

    for kind, axis, n in (
        (fft.window_range, 1, expected[1]),
        (fft.window_doppler, 2, expected[2]),
        (fft.window_angle, 0, expected[0]),
    ):
        w = _window(kind, n)
        if w is not None:
            shape = [1, 1, 1]
            shape[axis] = n
            x = x * w.reshape(shape).astype(x.real.dtype)

    # Range and Doppler first (antenna axis still short), angle FFT last.
    y = sfft.fft(x, n=fft.n_range, axis=1)
    y = sfft.fft(y, n=fft.n_doppler, axis=2)
    y = sfft.fft(y, n=fft.n_angle, axis=0)
    y = sfft.fftshift(y, axes=(0, 2))

    return RadarCube(
        data=y,
        angle_axis=axis_array("angle", radar, fft),
        range_axis=axis_array("range", radar, fft),
        velocity_axis=axis_array("velocity", radar, fft),
    )


def range_velocity_map(cube: RadarCube) -> RangeVelocityMap:
    """Sum |cube| over the angle axis -> (n_range, n_doppler)."""
    return RangeVelocityMap(
        data=np.abs(cube.data).sum(axis=0),
        range_axis=cube.range_axis,
        velocity_axis=cube.velocity_axis,
    )


def range_angle_map(cube: RadarCube) -> RangeAngleMap:
    """Sum |cube| over the Doppler axis, oriented range x angle (256 x 64 at defaults)."""
    return RangeAngleMap(
        data=np.abs(cube.data).sum(axis=2).T,
        range_axis=cube.range_axis,
        angle_axis=cube.angle_axis,
    )
