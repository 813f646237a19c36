"""Seeded scenario generators for the shipped experiment suites.

Static clutter episodes drive the end effector straight at an obstacle;
moving-sphere episodes hold a posture while a scripted sphere sweeps through
the reachable workspace. Obstacles keep a standoff from the base column
(early links cannot retreat, so base-targeting attacks are unwinnable by
construction) and scripted speeds respect the 0.5 m/s cap the filter is
rated for at 50 Hz.
"""

from __future__ import annotations

import numpy as np

from .geometry import Transform
from .kinematics import default_models, forward_kinematics, \
    min_capsule_distance_to_point
from .poisson_field import SolverSettings
from .safety_filter import FilterConfig
from .simulator import NominalSpec, Scenario, Trajectory
from .voxel_grid import GridDims, ObstacleShape, WorldBounds

HOME_Q = np.array([0.0, 0.9, 0.0, -1.3, 0.0, 1.9, 0.8])
WORKSPACE = WorldBounds(np.array([-1.0, -1.0, 0.0]), np.array([1.0, 1.0, 2.0]))
BASE_STANDOFF = 0.34  # min obstacle-center distance from the base column axis


def _sample_clutter_position(rng: np.random.Generator) -> np.ndarray:
    theta = rng.uniform(-2.2, 2.2)
    rho = rng.uniform(0.45, 0.62)
    z = rng.uniform(0.35, 0.85)
    return np.array([rho * np.cos(theta), rho * np.sin(theta), z])


def static_clutter_scenario(seed: int, dims: int = 64, duration: float = 30.0,
                            control_rate: float = 50.0, epsilon: float = 0.1,
                            delta: float = 0.01) -> Scenario:
    """Randomized static obstacles plus an adversarial nominal controller
    that aims the end effector at the first obstacle's center."""
    rng = np.random.default_rng(seed)
    model = default_models()["arm7"]
    home_poses = forward_kinematics(model, HOME_Q)
    obstacles = []
    guard = 0
    while len(obstacles) < int(rng.integers(2, 4)) and guard < 200:
        guard += 1
        pos = _sample_clutter_position(rng)
        if np.linalg.norm(pos[:2]) < BASE_STANDOFF:
            continue
        if min_capsule_distance_to_point(model, home_poses, pos) < 0.30:
            continue
        if any(np.linalg.norm(pos - s.pose.pos) < 0.34 for s, _ in obstacles):
            continue
        if rng.random() < 0.7:
            shape = ObstacleShape("sphere", Transform(np.eye(3), pos),
                                  radius=float(rng.uniform(0.10, 0.15)))
        else:
            shape = ObstacleShape("box", Transform(np.eye(3), pos),
                                  half_extents=rng.uniform(0.07, 0.12, size=3))
        obstacles.append((shape, Trajectory("static")))
    return Scenario(
        robot=model, q0=HOME_Q.copy(), obstacles=obstacles,
        bounds=WORKSPACE, dims=GridDims(dims, dims, dims),
        epsilon=epsilon, delta=delta, control_rate=control_rate,
        duration=duration,
        nominal=NominalSpec(mode="adversarial_toward_obstacle", kp=1.5,
                            obstacle_index=0),
        filter_config=FilterConfig(), solver=SolverSettings(), seed=seed,
        name=f"static_clutter_{seed:03d}",
    )


def moving_sphere_scenario(seed: int, dims: int = 64, duration: float = 30.0,
                           control_rate: float = 50.0, epsilon: float = 0.1,
                           delta: float = 0.01, speed: float = 0.4,
                           field_every: int = 4) -> Scenario:
    """A scripted sphere sweeps back and forth along a workspace chord that
    passes through the arm's reach while keeping clear of the base column."""
    rng = np.random.default_rng(seed)
    model = default_models()["arm7"]
    radius = float(rng.uniform(0.11, 0.15))
    # chord at perpendicular distance d from the base axis, on the side the
    # home pose occupies
    d = rng.uniform(BASE_STANDOFF + radius, 0.5)
    phi = rng.uniform(-0.9, 0.9)
    z = rng.uniform(0.45, 0.85)
    normal = np.array([np.cos(phi), np.sin(phi)])
    tangent = np.array([-np.sin(phi), np.cos(phi)])
    half = np.sqrt(max(0.75**2 - d**2, 0.05))
    p0 = np.array([*(d * normal - half * tangent), z])
    p1 = np.array([*(d * normal + half * tangent), z])
    shape = ObstacleShape("sphere", Transform(np.eye(3), p0), radius=radius)
    traj = Trajectory("scripted", script={
        "type": "line", "start": p0.tolist(), "end": p1.tolist(),
        "speed": min(speed, 0.5), "mode": "pingpong",
    })
    return Scenario(
        robot=model, q0=HOME_Q.copy(), obstacles=[(shape, traj)],
        bounds=WORKSPACE, dims=GridDims(dims, dims, dims),
        epsilon=epsilon, delta=delta, control_rate=control_rate,
        duration=duration,
        nominal=NominalSpec(mode="hold_q", kp=2.0),
        filter_config=FilterConfig(),
        solver=SolverSettings(omega=1.91, residual_tol=1e-3), seed=seed,
        name=f"moving_sphere_{seed:03d}", field_every=field_every,
    )
