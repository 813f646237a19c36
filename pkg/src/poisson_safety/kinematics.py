"""Serial-chain kinematics: link poses, body-point positions, and point
Jacobians, plus the built-in robot catalog.

Link numbering: link 0 is the unactuated base; link k (k >= 1) is the body
rigidly attached after joint k. Collision geometry is a sphere/capsule union
per link, which gives the surface sampler and the clearance oracle an exact
analytic surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .geometry import Transform, axis_angle_matrix, point_segment_distance


@dataclass(frozen=True)
class JointSpec:
    """One joint: rigid offset from the parent link frame, then a revolute
    rotation about (or prismatic translation along) ``axis``."""

    parent_offset: Transform
    axis: np.ndarray
    kind: str = "revolute"
    q_min: float = -np.pi
    q_max: float = np.pi
    v_max: float = 2.0

    def __post_init__(self):
        ax = np.asarray(self.axis, dtype=float)
        n = np.linalg.norm(ax)
        if abs(n - 1.0) > 1e-9:
            raise ValueError("joint axis must be a unit vector")
        object.__setattr__(self, "axis", ax)
        if self.kind not in ("revolute", "prismatic"):
            raise ValueError(f"unknown joint kind {self.kind!r}")
        if not self.q_min < self.q_max:
            raise ValueError("q_min must be below q_max")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")


@dataclass(frozen=True)
class LinkGeometry:
    """Collision primitives in the link frame: capsules as (p0, p1, radius);
    a zero-length capsule is a sphere."""

    capsules: Tuple[Tuple[np.ndarray, np.ndarray, float], ...] = ()

    def __post_init__(self):
        caps = []
        for p0, p1, r in self.capsules:
            if r <= 0:
                raise ValueError("primitive radius must be positive")
            caps.append((np.asarray(p0, dtype=float), np.asarray(p1, dtype=float), float(r)))
        object.__setattr__(self, "capsules", tuple(caps))


@dataclass(frozen=True)
class BodyPoint:
    """A point fixed in a link frame."""

    link_index: int
    local: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "local", np.asarray(self.local, dtype=float))


@dataclass(frozen=True)
class RobotModel:
    name: str
    joints: Tuple[JointSpec, ...]
    links: Tuple[LinkGeometry, ...]  # one per link: base plus one per joint
    base_pose: Transform = field(default_factory=Transform.identity)
    ee_point: Optional[BodyPoint] = None

    def __post_init__(self):
        if len(self.joints) < 1:
            raise ValueError("a robot needs at least one joint")
        if len(self.links) != len(self.joints) + 1:
            raise ValueError("need one LinkGeometry per joint plus the base")

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def q_lower(self) -> np.ndarray:
        return np.array([j.q_min for j in self.joints])

    @property
    def q_upper(self) -> np.ndarray:
        return np.array([j.q_max for j in self.joints])

    @property
    def v_limits(self) -> np.ndarray:
        return np.array([j.v_max for j in self.joints])

    def end_effector(self) -> BodyPoint:
        if self.ee_point is not None:
            return self.ee_point
        return BodyPoint(self.n, np.zeros(3))


def forward_kinematics(model: RobotModel, q: np.ndarray) -> List[Transform]:
    """World pose of every link frame, base first (length n + 1)."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n,):
        raise ValueError(f"expected q of length {model.n}")
    poses = [model.base_pose]
    cur = model.base_pose
    for spec, qi in zip(model.joints, q):
        cur = cur.compose(spec.parent_offset)
        if spec.kind == "revolute":
            cur = cur.compose(Transform(axis_angle_matrix(spec.axis, qi), np.zeros(3)))
        else:
            cur = cur.compose(Transform(np.eye(3), spec.axis * qi))
        poses.append(cur)
    return poses


def body_point_position(model: RobotModel, q: np.ndarray, p: BodyPoint) -> np.ndarray:
    poses = forward_kinematics(model, q)
    return poses[p.link_index].apply(p.local)


def joint_world_frames(model: RobotModel, poses: List[Transform]):
    """World axis and origin of each joint given link poses."""
    axes, origins = [], []
    for k, spec in enumerate(model.joints):
        pre = poses[k].compose(spec.parent_offset)
        axes.append(pre.rot @ spec.axis)
        origins.append(pre.pos)
    return axes, origins


def point_jacobian(model: RobotModel, q: np.ndarray, p: BodyPoint,
                   poses: Optional[List[Transform]] = None) -> np.ndarray:
    """3 x n Jacobian of the world position of ``p``: revolute ancestors
    contribute w x (y - o), prismatic ancestors their world axis, columns for
    joints distal to the point's link are zero."""
    if poses is None:
        poses = forward_kinematics(model, q)
    if not (0 <= p.link_index <= model.n):
        raise ValueError("link index out of range")
    y = poses[p.link_index].apply(p.local)
    J = np.zeros((3, model.n))
    axes, origins = joint_world_frames(model, poses)
    for k in range(p.link_index):
        if model.joints[k].kind == "revolute":
            J[:, k] = np.cross(axes[k], y - origins[k])
        else:
            J[:, k] = axes[k]
    return J


def link_capsules_world(model: RobotModel, poses: List[Transform]):
    """All collision capsules in world frame: list of (link, p0, p1, r)."""
    out = []
    for li, geom in enumerate(model.links):
        T = poses[li]
        for p0, p1, r in geom.capsules:
            out.append((li, T.apply(p0), T.apply(p1), r))
    return out


def _planar_two_link(l1: float = 0.5, l2: float = 0.4) -> RobotModel:
    joints = (
        JointSpec(Transform.identity(), np.array([0.0, 0.0, 1.0]),
                  q_min=-np.pi, q_max=np.pi, v_max=3.0),
        JointSpec(Transform(np.eye(3), np.array([l1, 0.0, 0.0])),
                  np.array([0.0, 0.0, 1.0]), q_min=-np.pi, q_max=np.pi, v_max=3.0),
    )
    links = (
        LinkGeometry(),
        LinkGeometry((((0.0, 0.0, 0.0), (l1, 0.0, 0.0), 0.04),)),
        LinkGeometry((((0.0, 0.0, 0.0), (l2, 0.0, 0.0), 0.04),)),
    )
    return RobotModel("planar2", joints, links,
                      ee_point=BodyPoint(2, np.array([l2, 0.0, 0.0])))


def _seven_dof_arm() -> RobotModel:
    """7-joint revolute chain with FR3-class topology, scale, and limits.

    The base column's collision capsule starts above the floor-buffer band so
    that every surface sample can sit in buffered free space; obstacles are
    expected to stay clear of the base axis (early links cannot retreat).
    """
    t = lambda x, y, z: Transform(np.eye(3), np.array([x, y, z]))
    zhat = np.array([0.0, 0.0, 1.0])
    yhat = np.array([0.0, 1.0, 0.0])
    joints = (
        JointSpec(t(0, 0, 0.333), zhat, q_min=-2.74, q_max=2.74, v_max=2.0),
        JointSpec(t(0, 0, 0), yhat, q_min=-1.78, q_max=1.78, v_max=2.0),
        JointSpec(t(0, 0, 0.316), zhat, q_min=-2.90, q_max=2.90, v_max=2.0),
        JointSpec(t(0.07, 0, 0), yhat, q_min=-3.04, q_max=-0.15, v_max=2.0),
        JointSpec(t(-0.07, 0, 0.34), zhat, q_min=-2.81, q_max=2.81, v_max=2.6),
        JointSpec(t(0, 0, 0), yhat, q_min=0.54, q_max=4.52, v_max=2.6),
        JointSpec(t(0.088, 0, 0), zhat, q_min=-3.02, q_max=3.02, v_max=2.6),
    )
    links = (
        LinkGeometry((((0, 0, 0.21), (0, 0, 0.31), 0.055),)),
        LinkGeometry((((0, 0, -0.05), (0, 0, 0.0), 0.055),)),
        LinkGeometry((((0, 0, 0.0), (0, 0, 0.316), 0.05),)),
        LinkGeometry((((0, 0, 0.0), (0.07, 0, 0.0), 0.045),)),
        LinkGeometry((((-0.07, 0, 0.0), (-0.07, 0, 0.34), 0.045),)),
        LinkGeometry((((0, 0, 0.0), (0, 0, 0.0), 0.045),)),
        LinkGeometry((((0.088, 0, 0.0), (0.088, 0, 0.0), 0.042),)),
        LinkGeometry((((0, 0, 0.04), (0, 0, 0.13), 0.04),)),
    )
    return RobotModel("arm7", joints, links,
                      ee_point=BodyPoint(7, np.array([0.0, 0.0, 0.13])))


def default_models() -> dict:
    """Built-in catalog: the 7-joint arm used by the shipped scenarios and a
    planar 2-link arm whose closed-form kinematics back the test oracles."""
    return {"arm7": _seven_dof_arm(), "planar2": _planar_two_link()}


def model_reach(model: RobotModel) -> float:
    """Upper bound on the horizontal reach from the base axis: sum of the
    joint offset lengths beyond the first joint plus the end-effector
    extent. The workspace box must be at least this wide around the base."""
    reach = 0.0
    for spec in model.joints[1:]:
        reach += float(np.linalg.norm(spec.parent_offset.pos))
    ee = model.end_effector()
    reach += float(np.linalg.norm(ee.local))
    tip_extent = 0.0
    for p0, p1, r in model.links[-1].capsules:
        tip_extent = max(tip_extent, float(np.linalg.norm(p1)) + r
                         - float(np.linalg.norm(ee.local)))
    return reach + max(tip_extent, 0.0)


def min_capsule_distance_to_point(model: RobotModel, poses, point) -> float:
    """Distance from a world point to the robot's capsule surface union."""
    best = np.inf
    for _, p0, p1, r in link_capsules_world(model, poses):
        best = min(best, float(point_segment_distance(point, p0, p1)) - r)
    return best
