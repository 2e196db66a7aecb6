"""Constant-speed retiming of planar paths."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_SPEED = 0.1    # m/s
DEFAULT_RATE = 500.0   # Hz


class RetimeError(ValueError):
    pass


@dataclass
class Trajectory:
    """Time-stamped planar path; samples are (t, x, y) with t strictly increasing.

    When constant_speed is set, every inter-sample spatial gap equals
    speed / rate except possibly the final partial tick.
    """
    samples: np.ndarray  # shape (n, 3), columns t, x, y
    constant_speed: bool = False
    speed: float = DEFAULT_SPEED
    rate: float = DEFAULT_RATE

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return float(self.samples[-1, 0])

    @property
    def points(self) -> np.ndarray:
        return self.samples[:, 1:]

    def decimate(self, stride: int) -> "Trajectory":
        """Keep every stride-th sample plus the final one."""
        if stride <= 1 or len(self.samples) <= 2:
            return self
        idx = list(range(0, len(self.samples), stride))
        if idx[-1] != len(self.samples) - 1:
            idx.append(len(self.samples) - 1)
        return Trajectory(self.samples[idx].copy(), constant_speed=False,
                          speed=self.speed, rate=self.rate)

    def to_dict(self, stride: int = 1) -> dict:
        traj = self.decimate(stride) if stride > 1 else self
        return {
            "samples": [[float(t), float(x), float(y)] for t, x, y in traj.samples],
            "constant_speed": traj.constant_speed,
            "speed": self.speed,
            "rate": self.rate,
            "duration": self.duration,
            "sample_count": len(self.samples),
            "stride": stride,
        }


def path_length(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    deltas = np.diff(points, axis=0)
    return float(np.hypot(deltas[:, 0], deltas[:, 1]).sum())


def retime_constant_speed(path, speed: float = DEFAULT_SPEED,
                          rate: float = DEFAULT_RATE) -> Trajectory:
    """Resample a polyline by arc length at fixed ticks of 1/rate seconds.

    The returned trajectory covers both endpoints; its duration is total
    length / speed, so the final gap may be a partial tick.
    """
    points = np.asarray(path, dtype=float)
    if points.ndim == 1:
        points = points.reshape(1, 2)
    if points.size == 0:
        raise RetimeError("path must contain at least one point")
    if points.shape[1] != 2:
        raise RetimeError("path points must be (x, y) pairs")
    if not np.isfinite(points).all():
        raise RetimeError("path contains non-finite coordinates")
    if speed <= 0 or rate <= 0:
        raise RetimeError("speed and rate must be positive")

    seg = np.diff(points, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seg_len.sum())
    if total == 0.0:
        return Trajectory(np.array([[0.0, points[0, 0], points[0, 1]]]),
                          constant_speed=True, speed=speed, rate=rate)

    duration = total / speed
    dt = 1.0 / rate
    n_full = int(math.floor(duration / dt + 1e-9))
    times = np.arange(n_full + 1) * dt
    if duration - times[-1] > 1e-9 * max(1.0, duration):
        times = np.append(times, duration)

    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    arc = np.minimum(times * speed, total)
    xs = np.interp(arc, cum, points[:, 0])
    ys = np.interp(arc, cum, points[:, 1])
    samples = np.column_stack([times, xs, ys])
    return Trajectory(samples, constant_speed=True, speed=speed, rate=rate)
