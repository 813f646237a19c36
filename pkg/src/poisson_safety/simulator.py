"""Closed-loop episode engine.

Each tick: advance obstacle poses, refresh the occupancy grid and safety
field when the voxelization changed (re-solves are warm started; unchanged
grids reuse the published field, which a warm solve would reproduce in a
sweep or two), build the filter rows, solve the QP, integrate the joint
state, and record telemetry including an analytic ground-truth clearance
check that is independent of the voxel pipeline.

The loop is strictly single-threaded and deterministic for a fixed scenario:
telemetry state fields are bit-reproducible across runs; wall-clock timing
fields are measurements and are not.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import Transform, point_segment_distance
from .kinematics import RobotModel, forward_kinematics, point_jacobian
from .poisson_field import (FieldPair, ScalarField, SolverSettings,
                            sample_value, solve_poisson)
from .safety_filter import (FilterConfig, FilterResult, SafetyFilter,
                            barrier_rows, clf_row, joint_limit_rows)
from .sampling import DenseSurfaceCloud, SampleSet, generate_dense_cloud, \
    poisson_disk_downsample
from .voxel_grid import GridDims, ObstacleShape, OccupancyGrid, WorldBounds, \
    erode_free_space, rasterize_scene


class EpisodeAbort(RuntimeError):
    """Raised when an episode cannot continue (e.g. free space vanished)."""


# permitted live-tuning ranges for filter gains
GAIN_RANGES = {
    "alpha": (0.1, 20.0),
    "issf_eps0": (0.0, 1.0),
    "alpha_joint": (0.5, 50.0),
    "clf_gamma": (0.1, 10.0),
    "slack_penalty": (1.0, 1e5),
}


@dataclass(frozen=True)
class Trajectory:
    """Obstacle motion source.

    kind 'static' holds the shape's own pose; 'keyframed' interpolates
    time-stamped positions linearly (rotation held from the shape pose);
    'scripted' evaluates a named parametric path; 'external' follows the
    latest teleop pose.
    """

    kind: str = "static"
    keyframes: Tuple[Tuple[float, np.ndarray], ...] = ()
    script: Optional[dict] = None

    def __post_init__(self):
        if self.kind not in ("static", "keyframed", "scripted", "external"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "keyframed":
            if len(self.keyframes) < 1:
                raise ValueError("keyframed trajectory needs keyframes")
            ts = [t for t, _ in self.keyframes]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("keyframe times must be strictly increasing")
        if self.kind == "scripted" and not self.script:
            raise ValueError("scripted trajectory needs script parameters")

    def position_at(self, t: float, home: np.ndarray) -> np.ndarray:
        if self.kind in ("static", "external"):
            return home
        if self.kind == "keyframed":
            ts = np.array([k[0] for k in self.keyframes])
            ps = np.array([k[1] for k in self.keyframes])
            if t <= ts[0]:
                return ps[0]
            if t >= ts[-1]:
                return ps[-1]
            i = int(np.searchsorted(ts, t) - 1)
            w = (t - ts[i]) / (ts[i + 1] - ts[i])
            return (1 - w) * ps[i] + w * ps[i + 1]
        s = self.script
        stype = s["type"]
        if stype == "line":
            p0 = np.asarray(s["start"], dtype=float)
            p1 = np.asarray(s["end"], dtype=float)
            length = float(np.linalg.norm(p1 - p0))
            if length < 1e-12:
                return p0
            u = s.get("speed", 0.25) * t / length
            if s.get("mode", "pingpong") == "pingpong":
                cycle = u % 2.0
                u = cycle if cycle <= 1.0 else 2.0 - cycle
            else:
                u = min(u, 1.0)
            return p0 + u * (p1 - p0)
        if stype == "circle":
            center = np.asarray(s["center"], dtype=float)
            r = float(s["radius"])
            period = float(s["period"])
            phase = float(s.get("phase", 0.0))
            ang = 2.0 * np.pi * t / period + phase
            axis = np.asarray(s.get("axis", (0.0, 0.0, 1.0)), dtype=float)
            axis = axis / np.linalg.norm(axis)
            tmp = np.array([1.0, 0, 0]) if abs(axis[0]) < 0.9 else np.array([0, 1.0, 0])
            e1 = np.cross(axis, tmp)
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(axis, e1)
            return center + r * (np.cos(ang) * e1 + np.sin(ang) * e2)
        if stype == "lissajous":
            center = np.asarray(s["center"], dtype=float)
            amp = np.asarray(s["amplitude"], dtype=float)
            freq = np.asarray(s["frequency"], dtype=float)
            phase = np.asarray(s.get("phase", (0.0, 0.0, 0.0)), dtype=float)
            return center + amp * np.sin(2.0 * np.pi * freq * t + phase)
        raise ValueError(f"unknown script type {stype!r}")

    def max_speed(self) -> float:
        """Best-effort bound on the path speed, for the shipped-scenario cap."""
        if self.kind in ("static", "external"):
            return 0.0
        if self.kind == "keyframed":
            v = 0.0
            for (t0, p0), (t1, p1) in zip(self.keyframes, self.keyframes[1:]):
                v = max(v, float(np.linalg.norm(np.asarray(p1) - np.asarray(p0))) / (t1 - t0))
            return v
        s = self.script
        if s["type"] == "line":
            return float(s.get("speed", 0.25))
        if s["type"] == "circle":
            return 2.0 * np.pi * float(s["radius"]) / float(s["period"])
        amp = np.asarray(s["amplitude"], dtype=float)
        freq = np.asarray(s["frequency"], dtype=float)
        return float(np.linalg.norm(2.0 * np.pi * freq * amp))


@dataclass
class NominalSpec:
    """Declarative nominal controller: hold_q | ee_waypoints |
    adversarial_toward_obstacle | external."""

    mode: str = "hold_q"
    kp: float = 2.0
    waypoints: Tuple[np.ndarray, ...] = ()
    waypoint_tol: float = 0.05
    obstacle_index: int = 0
    q_ref: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.mode not in ("hold_q", "ee_waypoints",
                             "adversarial_toward_obstacle", "external"):
            raise ValueError(f"unknown nominal mode {self.mode!r}")


@dataclass
class Scenario:
    robot: RobotModel
    q0: np.ndarray
    obstacles: List[Tuple[ObstacleShape, Trajectory]]
    bounds: WorldBounds
    dims: GridDims
    epsilon: float = 0.1
    delta: float = 0.01
    control_rate: float = 50.0
    duration: float = 10.0
    nominal: NominalSpec = dc_field(default_factory=NominalSpec)
    filter_config: FilterConfig = dc_field(default_factory=FilterConfig)
    solver: SolverSettings = dc_field(default_factory=SolverSettings)
    seed: int = 0
    name: str = "scenario"
    field_every: int = 1  # grid/field refresh cadence in control ticks

    def __post_init__(self):
        self.q0 = np.asarray(self.q0, dtype=float)
        if not (10.0 <= self.control_rate <= 200.0):
            raise ValueError("control_rate must lie in [10, 200] Hz")
        if not (self.epsilon > self.delta > 0):
            raise ValueError("need epsilon > delta > 0")
        if self.q0.shape != (self.robot.n,):
            raise ValueError("q0 length mismatch")
        if int(self.field_every) < 1:
            raise ValueError("field_every must be >= 1")

    @property
    def dt(self) -> float:
        return 1.0 / self.control_rate

    @property
    def num_ticks(self) -> int:
        return int(round(self.duration * self.control_rate))


@dataclass
class TelemetryRecord:
    t: float
    q: np.ndarray
    v_nom: np.ndarray
    v_safe: np.ndarray
    min_h_samples: float
    min_true_clearance: float
    qp_time: float
    pde_time: float
    buffer_time: float
    pde_iters: int
    qp_status: str
    slack: float
    premise_ok: bool
    clamp_anomaly: bool
    base_proximal: bool


def step_state(q: np.ndarray, v: np.ndarray, dt: float,
               model: RobotModel) -> Tuple[np.ndarray, bool]:
    """Explicit Euler step of the single-integrator state, hard-clamped to
    joint limits. Returns (q_next, clamped) -- clamping is an anomaly the
    filter should have prevented. Crossings below 1e-9 rad are float
    roundoff from the QP tolerance and are clipped without flagging."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    q_next = np.asarray(q, dtype=float) + np.asarray(v, dtype=float) * dt
    lo, hi = model.q_lower, model.q_upper
    clamped = bool(np.any(q_next < lo - 1e-9) or np.any(q_next > hi + 1e-9))
    return np.clip(q_next, lo, hi), clamped


def ground_truth_min_clearance(model: RobotModel, q: np.ndarray,
                               cloud: DenseSurfaceCloud,
                               obstacles: Sequence[ObstacleShape],
                               bounds: WorldBounds,
                               poses=None) -> float:
    """Minimum analytic signed distance from the dense surface cloud (in
    world frame) to the obstacle union and the workspace walls. Positive
    means the sampled surface cover is strictly collision-free."""
    if poses is None:
        poses = forward_kinematics(model, q)
    best = np.inf
    for li, pts in cloud.points.items():
        world = poses[li].apply(pts)
        wall = np.minimum(world - bounds.min, bounds.max - world).min(axis=1)
        d = wall
        for shape in obstacles:
            d = np.minimum(d, shape.signed_distance(world))
        best = min(best, float(d.min()))
    return best


class _Controller:
    """Evaluates the nominal velocity and the active Cartesian target."""

    def __init__(self, model: RobotModel, spec: NominalSpec, q0: np.ndarray):
        self.model = model
        self.spec = spec
        self.q_ref = np.asarray(spec.q_ref, dtype=float) if spec.q_ref is not None \
            else np.asarray(q0, dtype=float)
        self.waypoint_idx = 0
        self.external_target: Optional[np.ndarray] = None

    def __call__(self, q, poses, t, obstacle_positions):
        spec = self.spec
        model = self.model
        target = None
        if spec.mode == "hold_q":
            v = spec.kp * (self.q_ref - q)
        else:
            ee = model.end_effector()
            x_ee = poses[ee.link_index].apply(ee.local)
            if spec.mode == "ee_waypoints":
                wp = np.asarray(spec.waypoints[self.waypoint_idx], dtype=float)
                if np.linalg.norm(x_ee - wp) < spec.waypoint_tol:
                    self.waypoint_idx = (self.waypoint_idx + 1) % len(spec.waypoints)
                    wp = np.asarray(spec.waypoints[self.waypoint_idx], dtype=float)
                target = wp
            elif spec.mode == "adversarial_toward_obstacle":
                target = obstacle_positions[spec.obstacle_index]
            else:  # external
                target = self.external_target
                if target is None:
                    v = spec.kp * (self.q_ref - q)
                    v = np.clip(v, -model.v_limits, model.v_limits)
                    return v, None
            J = point_jacobian(model, q, model.end_effector(), poses)
            err = target - x_ee
            # damped least squares keeps the command bounded near singularities
            JJt = J @ J.T + (0.05**2) * np.eye(3)
            v = J.T @ np.linalg.solve(JJt, spec.kp * err)
        v = np.clip(v, -model.v_limits, model.v_limits)
        return v, target


class Simulation:
    """Tick-by-tick simulation state shared by the headless runner and the
    live session server."""

    def __init__(self, scenario: Scenario, unfiltered: bool = False,
                 cloud: Optional[DenseSurfaceCloud] = None,
                 samples: Optional[SampleSet] = None):
        self.scenario = scenario
        self.unfiltered = unfiltered
        self.model = scenario.robot
        self.cloud = cloud if cloud is not None else \
            generate_dense_cloud(self.model, scenario.delta, seed=scenario.seed)
        self.samples = samples if samples is not None else \
            poisson_disk_downsample(self.cloud, scenario.epsilon)
        self.filter = SafetyFilter(self.model, scenario.filter_config)
        self.controller = _Controller(self.model, scenario.nominal, scenario.q0)
        self.obstacle_overrides: Dict[int, np.ndarray] = {}
        self.reset()

    def reset(self) -> None:
        sc = self.scenario
        self.q = sc.q0.copy()
        self.tick = 0
        self.t = 0.0
        self._raw: Optional[OccupancyGrid] = None
        self._buffered: Optional[OccupancyGrid] = None
        self._field: Optional[ScalarField] = None
        self._prev_field: Optional[ScalarField] = None
        self.filter.reset()
        self.controller.waypoint_idx = 0
        self.controller.external_target = None
        self.obstacle_overrides.clear()
        self._static_scene = all(tr.kind == "static" for _, tr in sc.obstacles) \
            and not any(tr.kind == "external" for _, tr in sc.obstacles)

    # -- live-session mutators (applied between ticks) --------------------

    def set_target(self, point: np.ndarray) -> None:
        self.controller.spec.mode = "external"
        self.controller.external_target = np.asarray(point, dtype=float)

    def move_obstacle(self, index: int, position: np.ndarray) -> None:
        if not (0 <= index < len(self.scenario.obstacles)):
            raise ValueError("obstacle index out of range")
        self.obstacle_overrides[index] = np.asarray(position, dtype=float)
        self._static_scene = False

    def set_gain(self, name: str, value: float) -> None:
        cfg = self.scenario.filter_config
        if name not in GAIN_RANGES:
            raise ValueError(f"unknown gain {name!r}")
        lo, hi = GAIN_RANGES[name]
        if not (lo <= value <= hi):
            raise ValueError(f"gain {name} outside [{lo}, {hi}]")
        kwargs = {f: getattr(cfg, f) for f in GAIN_RANGES}
        kwargs[name] = float(value)
        new_cfg = FilterConfig(**kwargs)
        self.scenario.filter_config = new_cfg
        self.filter.config = new_cfg

    def set_nominal_mode(self, mode: str) -> None:
        if mode not in ("hold_q", "external"):
            raise ValueError("live mode switch supports hold_q or external")
        self.controller.spec.mode = mode

    # -- core loop ---------------------------------------------------------

    def obstacle_positions(self) -> List[np.ndarray]:
        out = []
        for i, (shape, traj) in enumerate(self.scenario.obstacles):
            if i in self.obstacle_overrides:
                out.append(self.obstacle_overrides[i])
            else:
                out.append(traj.position_at(self.t, shape.pose.pos))
        return out

    def current_shapes(self) -> List[ObstacleShape]:
        shapes = []
        for (shape, _), pos in zip(self.scenario.obstacles, self.obstacle_positions()):
            shapes.append(shape.with_pose(Transform(shape.pose.rot, pos)))
        return shapes

    def _refresh_field(self, shapes: List[ObstacleShape]):
        """Rebuild grid and field when the voxelization changed. Runs on the
        field cadence; in between, the control loop reads the latest
        published field pair (the lockstep serialization of the decoupled
        field/control loops)."""
        sc = self.scenario
        buffer_time = 0.0
        pde_time = 0.0
        pde_iters = 0
        on_cadence = self.tick % int(sc.field_every) == 0
        need_raster = self._raw is None or (not self._static_scene and on_cadence)
        if need_raster:
            raw = rasterize_scene(shapes, sc.bounds, sc.dims, timestamp=self.t)
            changed = self._raw is None or \
                not np.array_equal(raw.occupied, self._raw.occupied)
        else:
            raw, changed = self._raw, False
        if changed:
            self._raw = raw
            t0 = time.perf_counter()
            buffered = erode_free_space(raw, sc.epsilon + sc.delta)
            buffer_time = time.perf_counter() - t0
            if buffered.empty_interior:
                raise EpisodeAbort("buffered free space is empty; grid too coarse "
                                   "or obstacles fill the workspace")
            t0 = time.perf_counter()
            new_field = solve_poisson(buffered, sc.solver, warm_start=self._field)
            pde_time = time.perf_counter() - t0
            pde_iters = new_field.iterations_used
            self._buffered = buffered
            if self._field is not None:
                self._prev_field = self._field
            self._field = new_field
        return buffer_time, pde_time, pde_iters

    @property
    def field(self) -> Optional[ScalarField]:
        """Latest published safety field (None before the first solve)."""
        return self._field

    def field_pair(self) -> FieldPair:
        if self._field is None:
            raise EpisodeAbort("field not initialized")
        prev = self._prev_field
        if prev is not None and prev.timestamp >= self._field.timestamp:
            prev = None
        return FieldPair(self._field, prev)

    def step(self) -> TelemetryRecord:
        sc = self.scenario
        shapes = self.current_shapes()
        buffer_time, pde_time, pde_iters = self._refresh_field(shapes)
        poses = forward_kinematics(self.model, self.q)
        obstacle_pos = [s.pose.pos for s in shapes]
        v_nom, target = self.controller(self.q, poses, self.t, obstacle_pos)

        pair = self.field_pair()
        hard = barrier_rows(self.model, self.q, self.samples, pair,
                            sc.filter_config, poses=poses)
        clamp_rows = any(r.clamped for r in hard)
        hard += joint_limit_rows(self.model, self.q, sc.filter_config)
        soft = None
        if target is not None:
            ee = self.model.end_effector()
            x_ee = poses[ee.link_index].apply(ee.local)
            J_ee = point_jacobian(self.model, self.q, ee, poses)
            soft = clf_row(x_ee, target, J_ee, sc.filter_config)

        if self.unfiltered:
            result = FilterResult(v_nom.copy(), 0.0, "bypassed",
                                  np.zeros(0, dtype=int), 0.0)
        else:
            result = self.filter.filter(v_nom, hard, soft)

        links, locals_ = self.samples.local_stacked()
        world = np.empty((len(links), 3))
        for li in np.unique(links):
            sel = links == li
            world[sel] = poses[li].apply(locals_[sel])
        lo = pair.current.bounds.min + 1e-9
        hi = pair.current.bounds.max - 1e-9
        world_q = np.clip(world, lo, hi)
        min_h = float(np.min(np.atleast_1d(sample_value(pair.current, world_q))))
        premise_ok = bool(self._buffered.free_at(world).all())
        clearance = ground_truth_min_clearance(self.model, self.q, self.cloud,
                                               shapes, sc.bounds, poses=poses)
        base_proximal = False
        base_axis_a = self.model.base_pose.pos + np.array([0.0, 0.0, 0.1])
        base_axis_b = self.model.base_pose.pos + np.array([0.0, 0.0, 0.4])
        for pos in obstacle_pos:
            if float(point_segment_distance(pos, base_axis_a, base_axis_b)) < 0.35:
                base_proximal = True

        q_next, clamped = step_state(self.q, result.v_safe, sc.dt, self.model)
        record = TelemetryRecord(
            t=self.t, q=self.q.copy(), v_nom=v_nom.copy(),
            v_safe=result.v_safe.copy(), min_h_samples=min_h,
            min_true_clearance=clearance, qp_time=result.solve_time,
            pde_time=pde_time, buffer_time=buffer_time, pde_iters=pde_iters,
            qp_status=result.status, slack=result.slack,
            premise_ok=premise_ok, clamp_anomaly=clamped or clamp_rows,
            base_proximal=base_proximal,
        )
        self.q = q_next
        self.tick += 1
        self.t = self.tick * sc.dt
        return record


def run_episode(scenario: Scenario, unfiltered: bool = False,
                ticks: Optional[int] = None,
                on_tick=None,
                cloud: Optional[DenseSurfaceCloud] = None,
                samples: Optional[SampleSet] = None) -> List[TelemetryRecord]:
    """Headless deterministic episode; returns per-tick telemetry records.

    ``on_tick(sim, record)`` runs after each tick (used by the live server
    and by tests that poke at internals mid-episode).
    """
    sim = Simulation(scenario, unfiltered=unfiltered, cloud=cloud, samples=samples)
    total = scenario.num_ticks if ticks is None else int(ticks)
    records: List[TelemetryRecord] = []
    for _ in range(total):
        rec = sim.step()
        records.append(rec)
        if on_tick is not None:
            on_tick(sim, rec)
    return records
