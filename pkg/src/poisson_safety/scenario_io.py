"""Scenario files: versioned JSON describing an episode end to end.

Sections: version, robot, grid, sampling, filter, solver, obstacles,
nominal, episode. Unknown keys are rejected with the offending JSON path;
decode errors carry the line/column from the parser. All lengths are meters,
angles radians, rates Hz, times seconds.
"""

from __future__ import annotations

import json

import numpy as np

from .geometry import Transform
from .kinematics import (BodyPoint, JointSpec, LinkGeometry, RobotModel,
                         default_models)
from .poisson_field import SolverSettings
from .safety_filter import FilterConfig
from .simulator import NominalSpec, Scenario, Trajectory
from .voxel_grid import GridDims, ObstacleShape, WorldBounds

SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """Validation failure; the message names the offending key path."""


def _require_keys(obj: dict, allowed: set, required: set, path: str) -> None:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError(f"{path}.{sorted(unknown)[0]}: unknown key")
    missing = required - set(obj)
    if missing:
        raise ScenarioError(f"{path}.{sorted(missing)[0]}: missing required key")


def _vec3(value, path: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{path}: expected a 3-vector") from None
    if arr.shape != (3,):
        raise ScenarioError(f"{path}: expected a 3-vector")
    return arr


def _number(value, path: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ScenarioError(f"{path}: expected a number")
    return float(value)


def _pose(obj: dict, path: str) -> Transform:
    _require_keys(obj, {"position", "quaternion"}, set(), path)
    pos = _vec3(obj.get("position", (0.0, 0.0, 0.0)), f"{path}.position")
    quat = obj.get("quaternion", (1.0, 0.0, 0.0, 0.0))
    try:
        return Transform.from_quat_pos(quat, pos)
    except (ValueError, TypeError) as e:
        raise ScenarioError(f"{path}.quaternion: {e}") from None


def _parse_shape(obj: dict, path: str) -> ObstacleShape:
    allowed = {"kind", "position", "quaternion", "radius", "half_extents",
               "half_length"}
    _require_keys(obj, allowed, {"kind"}, path)
    pose = _pose({k: obj[k] for k in ("position", "quaternion") if k in obj}, path)
    kind = obj["kind"]
    try:
        if kind == "sphere":
            return ObstacleShape("sphere", pose, radius=_number(obj.get("radius"), f"{path}.radius"))
        if kind == "box":
            return ObstacleShape("box", pose,
                                 half_extents=_vec3(obj.get("half_extents"), f"{path}.half_extents"))
        if kind == "capsule":
            return ObstacleShape("capsule", pose,
                                 radius=_number(obj.get("radius"), f"{path}.radius"),
                                 half_length=_number(obj.get("half_length"), f"{path}.half_length"))
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError(f"{path}: {e}") from None
    raise ScenarioError(f"{path}.kind: unknown obstacle kind {kind!r}")


def _parse_trajectory(obj: dict, path: str) -> Trajectory:
    _require_keys(obj, {"kind", "keyframes", "script"}, {"kind"}, path)
    kind = obj["kind"]
    try:
        if kind == "keyframed":
            frames = []
            for i, kf in enumerate(obj.get("keyframes", [])):
                _require_keys(kf, {"t", "position"}, {"t", "position"},
                              f"{path}.keyframes[{i}]")
                frames.append((_number(kf["t"], f"{path}.keyframes[{i}].t"),
                               _vec3(kf["position"], f"{path}.keyframes[{i}].position")))
            return Trajectory("keyframed", tuple(frames))
        if kind == "scripted":
            return Trajectory("scripted", script=obj.get("script"))
        return Trajectory(kind)
    except ScenarioError:
        raise
    except (ValueError, KeyError) as e:
        raise ScenarioError(f"{path}: {e}") from None


def _parse_robot(obj: dict, path: str) -> RobotModel:
    allowed = {"model", "base_pose", "joints", "links", "ee"}
    _require_keys(obj, allowed, {"model"}, path)
    name = obj["model"]
    catalog = default_models()
    if name in catalog:
        if len(set(obj) - {"model"}):
            raise ScenarioError(f"{path}: catalog models take no extra keys")
        return catalog[name]
    if name != "custom":
        raise ScenarioError(f"{path}.model: unknown model {name!r} "
                            f"(catalog: {sorted(catalog)}, or 'custom')")
    base = _pose(obj.get("base_pose", {}), f"{path}.base_pose")
    joints = []
    for i, j in enumerate(obj.get("joints", [])):
        jpath = f"{path}.joints[{i}]"
        _require_keys(j, {"offset_position", "offset_quaternion", "axis", "kind",
                          "q_min", "q_max", "v_max"}, {"axis"}, jpath)
        offset = Transform.from_quat_pos(j.get("offset_quaternion", (1, 0, 0, 0)),
                                         j.get("offset_position", (0, 0, 0)))
        try:
            joints.append(JointSpec(offset, _vec3(j["axis"], f"{jpath}.axis"),
                                    kind=j.get("kind", "revolute"),
                                    q_min=j.get("q_min", -np.pi),
                                    q_max=j.get("q_max", np.pi),
                                    v_max=j.get("v_max", 2.0)))
        except ValueError as e:
            raise ScenarioError(f"{jpath}: {e}") from None
    links = []
    for i, l in enumerate(obj.get("links", [])):
        lpath = f"{path}.links[{i}]"
        _require_keys(l, {"capsules"}, set(), lpath)
        caps = []
        for k, c in enumerate(l.get("capsules", [])):
            _require_keys(c, {"p0", "p1", "radius"}, {"p0", "p1", "radius"},
                          f"{lpath}.capsules[{k}]")
            caps.append((_vec3(c["p0"], f"{lpath}.p0"), _vec3(c["p1"], f"{lpath}.p1"),
                         _number(c["radius"], f"{lpath}.radius")))
        try:
            links.append(LinkGeometry(tuple(caps)))
        except ValueError as e:
            raise ScenarioError(f"{lpath}: {e}") from None
    ee = None
    if "ee" in obj:
        _require_keys(obj["ee"], {"link", "local"}, {"link", "local"}, f"{path}.ee")
        ee = BodyPoint(int(obj["ee"]["link"]), _vec3(obj["ee"]["local"], f"{path}.ee.local"))
    try:
        return RobotModel("custom", tuple(joints), tuple(links), base, ee)
    except ValueError as e:
        raise ScenarioError(f"{path}: {e}") from None


def parse_scenario(doc: dict) -> Scenario:
    top_allowed = {"version", "robot", "grid", "sampling", "filter", "solver",
                   "obstacles", "nominal", "episode"}
    _require_keys(doc, top_allowed,
                  {"version", "robot", "grid", "sampling", "episode"}, "scenario")
    if doc["version"] != SCENARIO_VERSION:
        raise ScenarioError(f"scenario.version: unsupported version {doc['version']!r}")

    robot = _parse_robot(doc["robot"], "scenario.robot")

    g = doc["grid"]
    _require_keys(g, {"bounds", "dims"}, {"bounds", "dims"}, "scenario.grid")
    _require_keys(g["bounds"], {"min", "max"}, {"min", "max"}, "scenario.grid.bounds")
    try:
        bounds = WorldBounds(_vec3(g["bounds"]["min"], "scenario.grid.bounds.min"),
                             _vec3(g["bounds"]["max"], "scenario.grid.bounds.max"))
        dims = GridDims(*[int(x) for x in g["dims"]])
    except (ValueError, TypeError) as e:
        raise ScenarioError(f"scenario.grid: {e}") from None

    s = doc["sampling"]
    _require_keys(s, {"epsilon", "delta"}, {"epsilon"}, "scenario.sampling")
    epsilon = _number(s["epsilon"], "scenario.sampling.epsilon")
    delta = _number(s.get("delta", epsilon / 10.0), "scenario.sampling.delta")

    f = doc.get("filter", {})
    _require_keys(f, {"alpha", "issf_eps0", "alpha_joint", "clf_gamma",
                      "slack_penalty"}, set(), "scenario.filter")
    try:
        filter_config = FilterConfig(**{k: _number(v, f"scenario.filter.{k}")
                                        for k, v in f.items()})
    except ValueError as e:
        raise ScenarioError(f"scenario.filter: {e}") from None

    so = doc.get("solver", {})
    _require_keys(so, {"omega", "residual_tol", "max_iters", "max_iters_warm",
                       "forcing"}, set(), "scenario.solver")
    so = dict(so)
    if "forcing" in so:
        so["forcing_c"] = so.pop("forcing")
    try:
        solver = SolverSettings(**so)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"scenario.solver: {e}") from None

    obstacles = []
    for i, ob in enumerate(doc.get("obstacles", [])):
        opath = f"scenario.obstacles[{i}]"
        _require_keys(ob, {"shape", "trajectory"}, {"shape"}, opath)
        shape = _parse_shape(ob["shape"], f"{opath}.shape")
        traj = _parse_trajectory(ob.get("trajectory", {"kind": "static"}),
                                 f"{opath}.trajectory")
        obstacles.append((shape, traj))

    nm = doc.get("nominal", {"mode": "hold_q"})
    _require_keys(nm, {"mode", "kp", "waypoints", "tol", "obstacle_index", "q_ref"},
                  {"mode"}, "scenario.nominal")
    try:
        nominal = NominalSpec(
            mode=nm["mode"], kp=_number(nm.get("kp", 2.0), "scenario.nominal.kp"),
            waypoints=tuple(_vec3(w, f"scenario.nominal.waypoints[{i}]")
                            for i, w in enumerate(nm.get("waypoints", []))),
            waypoint_tol=_number(nm.get("tol", 0.05), "scenario.nominal.tol"),
            obstacle_index=int(nm.get("obstacle_index", 0)),
            q_ref=np.asarray(nm["q_ref"], dtype=float) if "q_ref" in nm else None,
        )
    except ValueError as e:
        raise ScenarioError(f"scenario.nominal: {e}") from None
    if nominal.mode == "ee_waypoints" and not nominal.waypoints:
        raise ScenarioError("scenario.nominal.waypoints: required for ee_waypoints")
    if nominal.mode == "adversarial_toward_obstacle" and not obstacles:
        raise ScenarioError("scenario.nominal.obstacle_index: no obstacles defined")

    ep = doc["episode"]
    _require_keys(ep, {"q0", "control_rate", "duration", "seed", "name",
                       "field_every"},
                  {"q0"}, "scenario.episode")
    try:
        return Scenario(
            robot=robot, q0=_vec_n(ep["q0"], robot.n, "scenario.episode.q0"),
            obstacles=obstacles, bounds=bounds, dims=dims,
            epsilon=epsilon, delta=delta,
            control_rate=_number(ep.get("control_rate", 50.0),
                                 "scenario.episode.control_rate"),
            duration=_number(ep.get("duration", 10.0), "scenario.episode.duration"),
            nominal=nominal, filter_config=filter_config, solver=solver,
            seed=int(ep.get("seed", 0)), name=str(ep.get("name", "scenario")),
            field_every=int(ep.get("field_every", 1)),
        )
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError(f"scenario.episode: {e}") from None


def _vec_n(value, n: int, path: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (n,):
        raise ScenarioError(f"{path}: expected {n} numbers")
    return arr


def load_scenario(path) -> Scenario:
    with open(path) as f:
        text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"parse error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return parse_scenario(doc)


def scenario_to_dict(sc: Scenario) -> dict:
    catalog = default_models()
    if sc.robot.name in catalog:
        robot = {"model": sc.robot.name}
    else:
        robot = {
            "model": "custom",
            "base_pose": {"position": list(sc.robot.base_pose.pos),
                          "quaternion": list(sc.robot.base_pose.to_quat())},
            "joints": [
                {"offset_position": list(j.parent_offset.pos),
                 "offset_quaternion": list(j.parent_offset.to_quat()),
                 "axis": list(j.axis), "kind": j.kind,
                 "q_min": j.q_min, "q_max": j.q_max, "v_max": j.v_max}
                for j in sc.robot.joints
            ],
            "links": [
                {"capsules": [{"p0": list(p0), "p1": list(p1), "radius": r}
                              for p0, p1, r in geom.capsules]}
                for geom in sc.robot.links
            ],
        }
        if sc.robot.ee_point is not None:
            robot["ee"] = {"link": sc.robot.ee_point.link_index,
                           "local": list(sc.robot.ee_point.local)}
    obstacles = []
    for shape, traj in sc.obstacles:
        sh = {"kind": shape.kind, "position": list(shape.pose.pos),
              "quaternion": list(shape.pose.to_quat())}
        if shape.kind == "sphere":
            sh["radius"] = shape.radius
        elif shape.kind == "box":
            sh["half_extents"] = list(shape.half_extents)
        else:
            sh["radius"] = shape.radius
            sh["half_length"] = shape.half_length
        tr: dict = {"kind": traj.kind}
        if traj.kind == "keyframed":
            tr["keyframes"] = [{"t": t, "position": list(p)} for t, p in traj.keyframes]
        elif traj.kind == "scripted":
            tr["script"] = traj.script
        obstacles.append({"shape": sh, "trajectory": tr})
    nominal = {"mode": sc.nominal.mode, "kp": sc.nominal.kp}
    if sc.nominal.mode == "ee_waypoints":
        nominal["waypoints"] = [list(w) for w in sc.nominal.waypoints]
        nominal["tol"] = sc.nominal.waypoint_tol
    if sc.nominal.mode == "adversarial_toward_obstacle":
        nominal["obstacle_index"] = sc.nominal.obstacle_index
    if sc.nominal.q_ref is not None:
        nominal["q_ref"] = list(sc.nominal.q_ref)
    return {
        "version": SCENARIO_VERSION,
        "robot": robot,
        "grid": {"bounds": {"min": list(sc.bounds.min), "max": list(sc.bounds.max)},
                 "dims": list(sc.dims.shape)},
        "sampling": {"epsilon": sc.epsilon, "delta": sc.delta},
        "filter": {"alpha": sc.filter_config.alpha,
                   "issf_eps0": sc.filter_config.issf_eps0,
                   "alpha_joint": sc.filter_config.alpha_joint,
                   "clf_gamma": sc.filter_config.clf_gamma,
                   "slack_penalty": sc.filter_config.slack_penalty},
        "solver": {"omega": sc.solver.omega, "residual_tol": sc.solver.residual_tol,
                   "max_iters": sc.solver.max_iters,
                   "max_iters_warm": sc.solver.max_iters_warm,
                   "forcing": sc.solver.forcing_c},
        "obstacles": obstacles,
        "nominal": nominal,
        "episode": {"q0": list(sc.q0), "control_rate": sc.control_rate,
                    "duration": sc.duration, "seed": sc.seed, "name": sc.name,
                    "field_every": sc.field_every},
    }


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as f:
        json.dump(scenario_to_dict(sc), f, indent=2)
        f.write("\n")
