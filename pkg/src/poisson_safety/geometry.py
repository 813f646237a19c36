"""Rigid transforms and analytic signed-distance primitives.

Shared by the voxel rasterizer, the kinematic chain, and the ground-truth
collision oracle. All distances are exact for the supported primitives
(sphere, axis-aligned box in local frame, capsule), which is what the
erosion-soundness and clearance checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def quat_to_matrix(q) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to a 3x3 rotation matrix."""
    w, x, y, z = q
    n = w * w + x * x + y * y + z * z
    if n < 1e-12:
        raise ValueError("zero-norm quaternion")
    s = 2.0 / n
    return np.array(
        [
            [1 - s * (y * y + z * z), s * (x * y - w * z), s * (x * z + w * y)],
            [s * (x * y + w * z), 1 - s * (x * x + z * z), s * (y * z - w * x)],
            [s * (x * z - w * y), s * (y * z + w * x), 1 - s * (x * x + y * y)],
        ]
    )


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    ax = np.asarray(axis, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    K = np.array([[0, -ax[2], ax[1]], [ax[2], 0, -ax[0]], [-ax[1], ax[0], 0]])
    return np.eye(3) * c + s * K + (1 - c) * np.outer(ax, ax)


@dataclass(frozen=True)
class Transform:
    """Proper rigid transform: x_world = rot @ x_local + pos."""

    rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_quat_pos(quat, pos) -> "Transform":
        return Transform(quat_to_matrix(quat), np.asarray(pos, dtype=float))

    def compose(self, other: "Transform") -> "Transform":
        return Transform(self.rot @ other.rot, self.rot @ other.pos + self.pos)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Apply to one point (3,) or a stack of points (N, 3)."""
        p = np.asarray(pts, dtype=float)
        return p @ self.rot.T + self.pos

    def inverse(self) -> "Transform":
        rt = self.rot.T
        return Transform(rt, -rt @ self.pos)

    def to_quat(self) -> np.ndarray:
        """Rotation as a unit quaternion (w, x, y, z)."""
        R = self.rot
        t = np.trace(R)
        if t > 0:
            s = np.sqrt(t + 1.0) * 2
            return np.array(
                [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
            )
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(R[i, i] - R[j, j] - R[k, k] + 1.0, 0.0)) * 2
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
        return q


def sdf_sphere(pts: np.ndarray, center, radius: float) -> np.ndarray:
    d = np.asarray(pts, dtype=float) - np.asarray(center, dtype=float)
    return np.sqrt(np.sum(d * d, axis=-1)) - radius


def sdf_box(pts: np.ndarray, pose: Transform, half_extents) -> np.ndarray:
    """Exact SDF of an oriented box (negative inside)."""
    local = (np.atleast_2d(pts) - pose.pos) @ pose.rot
    q = np.abs(local) - np.asarray(half_extents, dtype=float)
    outside = np.sqrt(np.sum(np.maximum(q, 0.0) ** 2, axis=-1))
    inside = np.minimum(np.max(q, axis=-1), 0.0)
    out = outside + inside
    return out if np.asarray(pts).ndim > 1 else out[0]


def point_segment_distance(pts: np.ndarray, a, b) -> np.ndarray:
    """Distance from points to segment [a, b]."""
    a = np.asarray(a, dtype=float)
    ab = np.asarray(b, dtype=float) - a
    p = np.atleast_2d(pts) - a
    denom = float(ab @ ab)
    if denom < 1e-16:
        d = np.sqrt(np.sum(p * p, axis=-1))
    else:
        t = np.clip(p @ ab / denom, 0.0, 1.0)
        d = np.sqrt(np.sum((p - t[:, None] * ab) ** 2, axis=-1))
    return d if np.asarray(pts).ndim > 1 else d[0]


def sdf_capsule(pts: np.ndarray, a, b, radius: float) -> np.ndarray:
    return point_segment_distance(pts, a, b) - radius


def segment_segment_distance(p1, q1, p2, q2) -> float:
    """Minimum distance between segments [p1,q1] and [p2,q2] (exact)."""
    p1, q1, p2, q2 = (np.asarray(v, dtype=float) for v in (p1, q1, p2, q2))
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    if a < 1e-16 and e < 1e-16:
        return float(np.linalg.norm(r))
    if a < 1e-16:
        t = np.clip(f / e, 0.0, 1.0)
        s = 0.0
    else:
        c = d1 @ r
        if e < 1e-16:
            t = 0.0
            s = np.clip(-c / a, 0.0, 1.0)
        else:
            b = d1 @ d2
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-16 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t = 1.0
                s = np.clip((b - c) / a, 0.0, 1.0)
    closest1 = p1 + s * d1
    closest2 = p2 + t * d2
    return float(np.linalg.norm(closest1 - closest2))
