"""Live session server: runs the simulation loop in a worker thread,
broadcasts state frames over a WebSocket at a fixed rate, and applies
operator commands atomically between control ticks.

Command queueing is latest-wins for pose streams (set_target,
move_obstacle) and FIFO for discrete commands (pause, resume, reset,
set_gain, set_nominal_mode). Frames always reflect a completed tick; no
frame mixes pre- and post-command state.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from collections import deque
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .kinematics import forward_kinematics
from .poisson_field import sample_value, slice_values
from .simulator import GAIN_RANGES, EpisodeAbort, Scenario, Simulation
from .telemetry import record_to_dict

BROADCAST_HZ = 30.0

POSE_STREAM_KINDS = ("set_target", "move_obstacle")
DISCRETE_KINDS = ("pause", "resume", "reset", "set_gain", "set_nominal_mode")


class SessionState:
    """Shared state between the simulation thread and the network side."""

    def __init__(self, scenario: Scenario):
        self.sim = Simulation(scenario)
        self.lock = threading.Lock()
        self.latest_frame: Optional[dict] = None
        self.paused = False
        self.stop = False
        self.discrete: deque = deque()
        self.pose_stream: Dict[str, dict] = {}
        self.telemetry_log: List[dict] = []
        self.slice_axis = "y"
        self.slice_offset = 0.0

    def submit(self, cmd: dict) -> None:
        kind = cmd.get("type")
        with self.lock:
            if kind in POSE_STREAM_KINDS:
                key = kind if kind == "set_target" else f"{kind}:{cmd.get('index')}"
                self.pose_stream[key] = cmd
            else:
                self.discrete.append(cmd)

    def _apply_commands(self) -> None:
        with self.lock:
            discrete = list(self.discrete)
            self.discrete.clear()
            stream = list(self.pose_stream.values())
            self.pose_stream.clear()
        for cmd in discrete:
            kind = cmd["type"]
            if kind == "pause":
                self.paused = True
            elif kind == "resume":
                self.paused = False
            elif kind == "reset":
                self.sim.reset()
            elif kind == "set_gain":
                self.sim.set_gain(str(cmd["name"]), float(cmd["value"]))
            elif kind == "set_nominal_mode":
                self.sim.set_nominal_mode(str(cmd["mode"]))
        for cmd in stream:
            if cmd["type"] == "set_target":
                self.sim.set_target(np.asarray(cmd["point"], dtype=float))
            else:
                self.sim.move_obstacle(int(cmd["index"]),
                                       np.asarray(cmd["position"], dtype=float))

    def validate(self, cmd: dict) -> Optional[str]:
        """Returns an error message for malformed commands, else None."""
        kind = cmd.get("type")
        if kind not in POSE_STREAM_KINDS + DISCRETE_KINDS:
            return f"unknown command type {kind!r}"
        bounds = self.sim.scenario.bounds
        try:
            if kind == "set_target":
                point = np.asarray(cmd["point"], dtype=float)
                if point.shape != (3,):
                    return "set_target.point must be a 3-vector"
                if not bounds.contains(point):
                    return "set_target.point outside workspace bounds"
            elif kind == "move_obstacle":
                idx = int(cmd["index"])
                if not (0 <= idx < len(self.sim.scenario.obstacles)):
                    return "move_obstacle.index out of range"
                pos = np.asarray(cmd["position"], dtype=float)
                if pos.shape != (3,):
                    return "move_obstacle.position must be a 3-vector"
                if not bounds.contains(pos):
                    return "move_obstacle.position outside workspace bounds"
            elif kind == "set_gain":
                name, value = str(cmd["name"]), float(cmd["value"])
                if name not in GAIN_RANGES:
                    return f"unknown gain {name!r}"
                lo, hi = GAIN_RANGES[name]
                if not (lo <= value <= hi):
                    return f"gain {name} outside [{lo}, {hi}]"
            elif kind == "set_nominal_mode":
                if cmd.get("mode") not in ("hold_q", "external"):
                    return "set_nominal_mode.mode must be hold_q or external"
        except (KeyError, TypeError, ValueError) as e:
            return f"malformed {kind} command: {e}"
        return None

    def make_scene_frame(self) -> dict:
        sc = self.sim.scenario
        links = []
        for li, geom in enumerate(sc.robot.links):
            links.append({
                "link_index": li,
                "capsules": [{"p0": list(map(float, p0)), "p1": list(map(float, p1)),
                              "radius": r} for p0, p1, r in geom.capsules],
            })
        obstacles = []
        for shape, _ in sc.obstacles:
            entry = {"kind": shape.kind, "radius": shape.radius,
                     "half_length": shape.half_length}
            if shape.half_extents is not None:
                entry["half_extents"] = list(map(float, shape.half_extents))
            obstacles.append(entry)
        sample_links, _ = self.sim.samples.local_stacked()
        return {
            "type": "scene",
            "bounds": {"min": list(map(float, sc.bounds.min)),
                       "max": list(map(float, sc.bounds.max))},
            "links": links,
            "obstacles": obstacles,
            "sample_links": [int(x) for x in sample_links],
            "epsilon": sc.epsilon,
            "control_rate": sc.control_rate,
            "n_joints": sc.robot.n,
        }

    def _make_state_frame(self, record) -> dict:
        sim = self.sim
        poses = forward_kinematics(sim.model, sim.q)
        links, locals_ = sim.samples.local_stacked()
        world = np.empty((len(links), 3))
        for li in np.unique(links):
            sel = links == li
            world[sel] = poses[li].apply(locals_[sel])
        field = sim.field
        lo = field.bounds.min + 1e-9
        hi = field.bounds.max - 1e-9
        h_vals = np.atleast_1d(sample_value(field, np.clip(world, lo, hi)))
        idx, plane = slice_values(field, self.slice_axis, self.slice_offset)
        target = sim.controller.external_target
        return {
            "type": "state",
            "t": record.t,
            "tick": sim.tick,
            "paused": self.paused,
            "q": [float(x) for x in sim.q],
            "link_poses": [{"position": list(map(float, p.pos)),
                            "quaternion": list(map(float, p.to_quat()))}
                           for p in poses],
            "samples": [{"link": int(links[i]),
                         "position": [round(float(v), 5) for v in world[i]],
                         "h": float(h_vals[i])} for i in range(len(links))],
            "obstacles": [{"position": list(map(float, s.pose.pos)),
                           "quaternion": list(map(float, s.pose.to_quat()))}
                          for s in sim.current_shapes()],
            "target": None if target is None else [float(x) for x in target],
            "slice": {
                "axis": self.slice_axis,
                "offset": self.slice_offset,
                "plane_index": idx,
                "values": [[round(float(v), 4) for v in row] for row in plane],
            },
            "telemetry": {k: record_to_dict(record)[k] for k in
                          ("min_h_samples", "min_true_clearance", "slack",
                           "qp_time", "pde_time", "qp_status")},
        }

    def loop(self) -> None:
        sc = self.sim.scenario
        dt = sc.dt
        next_tick = time.perf_counter()
        while not self.stop:
            self._apply_commands()
            if self.paused:
                time.sleep(0.005)
                next_tick = time.perf_counter()
                continue
            try:
                record = self.sim.step()
            except EpisodeAbort as e:
                with self.lock:
                    self.latest_frame = {"type": "error", "message": str(e)}
                self.paused = True
                continue
            frame = self._make_state_frame(record)
            with self.lock:
                self.latest_frame = frame
                self.telemetry_log.append(record_to_dict(record))
            next_tick += dt
            sleep = next_tick - time.perf_counter()
            if sleep > 0:
                time.sleep(sleep)
            else:
                next_tick = time.perf_counter()


def build_app(scenario: Scenario, ui_dir: Optional[Path] = None) -> FastAPI:
    from contextlib import asynccontextmanager

    state = SessionState(scenario)

    @asynccontextmanager
    async def lifespan(_app):
        state.stop = False
        state.thread = threading.Thread(target=state.loop, daemon=True)
        state.thread.start()
        yield
        state.stop = True
        state.thread.join(timeout=2.0)

    app = FastAPI(title="poisson-safety live session", lifespan=lifespan)
    app.state.session = state

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        await ws.send_text(json.dumps(state.make_scene_frame()))
        stop_send = asyncio.Event()

        async def sender():
            period = 1.0 / BROADCAST_HZ
            last_sent_tick = -1
            last_sent_at = 0.0
            while not stop_send.is_set():
                with state.lock:
                    frame = state.latest_frame
                    paused = state.paused
                now = time.monotonic()
                if frame is not None:
                    fresh = frame.get("tick") != last_sent_tick
                    # while paused, re-send the frozen frame as a keepalive
                    if fresh or (now - last_sent_at) > 0.25:
                        if paused and not fresh:
                            frame = dict(frame)
                            frame["paused"] = True
                        last_sent_tick = frame.get("tick", -1)
                        last_sent_at = now
                        await ws.send_text(json.dumps(frame))
                await asyncio.sleep(period)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    cmd = json.loads(text)
                except json.JSONDecodeError as e:
                    await ws.send_text(json.dumps(
                        {"type": "error", "message": f"bad JSON: {e.msg}"}))
                    continue
                err = state.validate(cmd)
                if err is not None:
                    await ws.send_text(json.dumps({"type": "error", "message": err}))
                    continue
                state.submit(cmd)
        except WebSocketDisconnect:
            pass
        finally:
            stop_send.set()
            send_task.cancel()

    @app.get("/telemetry.jsonl")
    async def telemetry_file():
        from fastapi.responses import PlainTextResponse

        with state.lock:
            rows = list(state.telemetry_log)
        return PlainTextResponse("\n".join(json.dumps(r) for r in rows))

    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend"
        ui_dir = candidate if candidate.exists() else None
    if ui_dir is not None and Path(ui_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
