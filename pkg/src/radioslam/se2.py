"""SE(2) pose arithmetic shared by the simulator, constraint builder and solver.

Poses are (x, y, theta) with theta kept in (-pi, pi]. Functions exist in a
scalar flavour (Pose2) for API-level code and a vectorized flavour operating
on (N, 3) float arrays for the hot paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    t = math.fmod(theta, TWO_PI)
    if t > math.pi:
        t -= TWO_PI
    elif t <= -math.pi:
        t += TWO_PI
    return t


def normalize_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized wrap into (-pi, pi]."""
    t = np.fmod(theta, TWO_PI)
    t = np.where(t > math.pi, t - TWO_PI, t)
    t = np.where(t <= -math.pi, t + TWO_PI, t)
    return t


@dataclass(frozen=True)
class Pose2:
    """A planar pose; theta is normalized on construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @staticmethod
    def from_array(a) -> "Pose2":
        return Pose2(float(a[0]), float(a[1]), float(a[2]))


def compose(a: Pose2, b: Pose2) -> Pose2:
    """a ∘ b: pose b expressed in a's frame, mapped to the world frame."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(a: Pose2) -> Pose2:
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(-(c * a.x + s * a.y), -(-s * a.x + c * a.y), -a.theta)


def relative(a: Pose2, b: Pose2) -> Pose2:
    """b in the frame of a, i.e. inverse(a) ∘ b."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    dx = b.x - a.x
    dy = b.y - a.y
    return Pose2(c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta)


def compose_increments(start: Pose2, increments: np.ndarray) -> np.ndarray:
    """Chain relative increments from a start pose into an (N+1, 3) trajectory."""
    increments = np.asarray(increments, dtype=float)
    n = len(increments)
    out = np.empty((n + 1, 3), dtype=float)
    out[0] = (start.x, start.y, start.theta)
    x, y, th = start.x, start.y, start.theta
    for k in range(n):
        dx, dy, dth = increments[k]
        c, s = math.cos(th), math.sin(th)
        x = x + c * dx - s * dy
        y = y + s * dx + c * dy
        th = normalize_angle(th + dth)
        out[k + 1] = (x, y, th)
    return out


def relative_increments(poses: np.ndarray) -> np.ndarray:
    """Per-step relative pose of poses[t] in the frame of poses[t-1], (N-1, 3)."""
    poses = np.asarray(poses, dtype=float)
    dx = poses[1:, 0] - poses[:-1, 0]
    dy = poses[1:, 1] - poses[:-1, 1]
    c = np.cos(poses[:-1, 2])
    s = np.sin(poses[:-1, 2])
    out = np.empty((len(poses) - 1, 3), dtype=float)
    out[:, 0] = c * dx + s * dy
    out[:, 1] = -s * dx + c * dy
    out[:, 2] = normalize_angles(poses[1:, 2] - poses[:-1, 2])
    return out


def path_lengths(poses: np.ndarray) -> np.ndarray:
    """Cumulative travelled distance along a pose sequence, (N,), starts at 0."""
    poses = np.asarray(poses, dtype=float)
    steps = np.hypot(np.diff(poses[:, 0]), np.diff(poses[:, 1]))
    out = np.zeros(len(poses), dtype=float)
    np.cumsum(steps, out=out[1:])
    return out
