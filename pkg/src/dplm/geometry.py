"""Angular math: source locations, bin grids, folding and great-circle distance.

Conventions used throughout the package: azimuth is measured in radians,
counterclockwise when seen from above, 0 straight ahead, positive to the
left; elevation is radians above the horizontal plane.  Azimuth lives on
[-pi, pi] (both endpoints name the rear direction), elevation on
[-pi/2, pi/2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_azimuth(azimuth: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(azimuth + math.pi, TWO_PI)
    if wrapped <= 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


@dataclass(frozen=True)
class SourceLocation:
    """A direction on the sphere around the listener (azimuth, elevation)."""

    azimuth: float
    elevation: float = 0.0

    def __post_init__(self):
        if not (-math.pi <= self.azimuth <= math.pi):
            raise ValueError(f"azimuth {self.azimuth} outside [-pi, pi]")
        if not (-math.pi / 2 <= self.elevation <= math.pi / 2):
            raise ValueError(f"elevation {self.elevation} outside [-pi/2, pi/2]")

    @classmethod
    def wrapped(cls, azimuth: float, elevation: float = 0.0) -> "SourceLocation":
        """Build a location, wrapping azimuth into (-pi, pi] and clamping elevation."""
        el = min(max(elevation, -math.pi / 2), math.pi / 2)
        return cls(wrap_azimuth(azimuth), el)

    @classmethod
    def from_degrees(cls, azimuth_deg: float, elevation_deg: float = 0.0) -> "SourceLocation":
        return cls.wrapped(math.radians(azimuth_deg), math.radians(elevation_deg))

    def to_unit_vector(self) -> np.ndarray:
        """Cartesian unit vector (x front, y left, z up)."""
        ce = math.cos(self.elevation)
        return np.array([
            ce * math.cos(self.azimuth),
            ce * math.sin(self.azimuth),
            math.sin(self.elevation),
        ])

    @classmethod
    def from_unit_vector(cls, v: np.ndarray) -> "SourceLocation":
        v = np.asarray(v, dtype=float)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("zero vector has no direction")
        x, y, z = v / norm
        return cls(math.atan2(y, x), math.asin(min(max(z, -1.0), 1.0)))


@dataclass(frozen=True)
class Trajectory:
    """Ordered (time, location) keyframes describing a source path."""

    locations: tuple[tuple[float, SourceLocation], ...]
    duration_sec: float

    def __post_init__(self):
        if len(self.locations) == 0:
            raise ValueError("trajectory needs at least one keyframe")
        times = [t for t, _ in self.locations]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError("keyframe times must be strictly increasing")
        if times[0] < 0.0 or times[-1] > self.duration_sec:
            raise ValueError("keyframe times must lie within [0, duration]")

    @classmethod
    def static(cls, loc: SourceLocation, duration_sec: float) -> "Trajectory":
        return cls(((0.0, loc),), duration_sec)


@dataclass(frozen=True)
class BinGrid:
    """Equally spaced azimuth/elevation class bins over the full sphere.

    Bins are half-open intervals [start, start + width) from the span start;
    a boundary angle belongs to the upper bin.  Azimuth spans (-pi, pi),
    elevation (-pi/2, pi/2).
    """

    n_azimuth: int = 50
    n_elevation: int = 25

    def __post_init__(self):
        if self.n_azimuth < 1 or self.n_elevation < 1:
            raise ValueError("bin counts must be positive")

    @property
    def azimuth_width(self) -> float:
        return TWO_PI / self.n_azimuth

    @property
    def elevation_width(self) -> float:
        return math.pi / self.n_elevation

    def azimuth_centers(self) -> np.ndarray:
        i = np.arange(self.n_azimuth)
        return -math.pi + self.azimuth_width * (i + 0.5)

    def elevation_centers(self) -> np.ndarray:
        i = np.arange(self.n_elevation)
        return -math.pi / 2 + self.elevation_width * (i + 0.5)


def azimuth_to_bin(azimuth: float, grid: BinGrid) -> int:
    """Azimuth bin index, half-open convention, clamped to the valid range."""
    idx = math.floor((azimuth + math.pi) / grid.azimuth_width)
    return min(max(idx, 0), grid.n_azimuth - 1)


def elevation_to_bin(elevation: float, grid: BinGrid) -> int:
    idx = math.floor((elevation + math.pi / 2) / grid.elevation_width)
    return min(max(idx, 0), grid.n_elevation - 1)


def angle_to_bin(loc: SourceLocation, grid: BinGrid) -> tuple[int, int]:
    """Map a location to its (azimuth_bin, elevation_bin) pair."""
    return azimuth_to_bin(loc.azimuth, grid), elevation_to_bin(loc.elevation, grid)


def bin_to_angle(az_bin: int, el_bin: int, grid: BinGrid) -> SourceLocation:
    """Bin-center location for a pair of bin indices."""
    if not (0 <= az_bin < grid.n_azimuth and 0 <= el_bin < grid.n_elevation):
        raise ValueError(f"bin indices ({az_bin}, {el_bin}) out of range")
    az = -math.pi + grid.azimuth_width * (az_bin + 0.5)
    el = -math.pi / 2 + grid.elevation_width * (el_bin + 0.5)
    return SourceLocation(az, el)


def fold_front_back(azimuth):
    """Reflect azimuths about the coronal plane into [-pi/2, pi/2].

    Front-back confusions, which interaural cues cannot resolve, map onto
    the same folded angle.  Accepts a scalar or an array.
    """
    az = np.asarray(azimuth, dtype=np.float64)
    folded = np.where(az > math.pi / 2, math.pi - az, az)
    folded = np.where(az < -math.pi / 2, -math.pi - az, folded)
    if np.isscalar(azimuth) or getattr(azimuth, "ndim", 0) == 0:
        return float(folded)
    return folded


def haversine(p: SourceLocation, q: SourceLocation) -> float:
    """Great-circle angular distance between two locations, in [0, pi].

    Evaluated as atan2 of the haversine radicand against its antipodal
    complement (the two sum to 1 analytically), which keeps full float
    accuracy at both tiny and near-antipodal separations; the plain
    asin form drifts by ~1e-8 near antipodes.  Identical inputs give
    exactly 0.
    """
    s_el = math.sin((p.elevation - q.elevation) / 2.0)
    s_az = math.sin((p.azimuth - q.azimuth) / 2.0)
    cc = math.cos(p.elevation) * math.cos(q.elevation)
    near = s_el * s_el + cc * s_az * s_az
    c_el = math.sin((p.elevation + q.elevation) / 2.0)
    c_az = math.cos((p.azimuth - q.azimuth) / 2.0)
    far = c_el * c_el + cc * c_az * c_az
    near = min(max(near, 0.0), 1.0)
    far = min(max(far, 0.0), 1.0)
    return 2.0 * math.atan2(math.sqrt(near), math.sqrt(far))


def angular_separation_deg(a, b) -> float:
    """Great-circle separation in degrees, in [0, 180].

    Accepts SourceLocations; bare numbers are read as azimuths in degrees
    at zero elevation.
    """
    if not isinstance(a, SourceLocation):
        a = SourceLocation.from_degrees(float(a))
    if not isinstance(b, SourceLocation):
        b = SourceLocation.from_degrees(float(b))
    return math.degrees(haversine(a, b))


def _slerp(va: np.ndarray, vb: np.ndarray, u: float) -> np.ndarray:
    # Shorter great-circle arc between two unit vectors.
    dot = float(np.clip(np.dot(va, vb), -1.0, 1.0))
    omega = math.acos(dot)
    if omega < 1e-9:
        v = (1.0 - u) * va + u * vb
        return v / np.linalg.norm(v)
    if math.pi - omega < 1e-9:
        raise ValueError("antipodal keyframes have no unique interpolation arc")
    s = math.sin(omega)
    return (math.sin((1.0 - u) * omega) * va + math.sin(u * omega) * vb) / s


def sample_trajectory(
    traj: Trajectory, frame_times: Union[float, Sequence[float]]
) -> Union[SourceLocation, list[SourceLocation]]:
    """Location at each frame time, slerped along the shorter great-circle arc.

    Times before the first or after the last keyframe hold the end keyframe.
    A scalar time returns a single location, a sequence returns a list.
    """
    scalar = np.isscalar(frame_times) or getattr(frame_times, "ndim", None) == 0
    times = [float(frame_times)] if scalar else list(frame_times)
    keys = traj.locations
    key_times = [t for t, _ in keys]
    key_vecs = [loc.to_unit_vector() for _, loc in keys]
    out = []
    for t in times:
        if t < 0.0 or t > traj.duration_sec:
            raise ValueError(f"frame time {t} outside [0, {traj.duration_sec}]")
        if t <= key_times[0]:
            out.append(keys[0][1])
            continue
        if t >= key_times[-1]:
            out.append(keys[-1][1])
            continue
        # rightmost keyframe with time <= t brackets from below
        j = int(np.searchsorted(key_times, t, side="right")) - 1
        t0, t1 = key_times[j], key_times[j + 1]
        u = (t - t0) / (t1 - t0)
        out.append(SourceLocation.from_unit_vector(_slerp(key_vecs[j], key_vecs[j + 1], u)))
    return out[0] if scalar else out
