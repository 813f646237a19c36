import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from poisson_safety.cli import main
from poisson_safety.scenario_io import save_scenario
from poisson_safety.scenarios import moving_sphere_scenario, \
    static_clutter_scenario
from poisson_safety.server import build_app


@pytest.fixture
def static_file(tmp_path):
    sc = static_clutter_scenario(seed=2, dims=32, duration=0.6)
    path = tmp_path / "static.json"
    save_scenario(sc, path)
    return path


class TestCliRun:
    def test_clean_run_exit_zero_and_record_count(self, static_file, tmp_path):
        out = tmp_path / "out"
        code = main(["run", str(static_file), "--out", str(out)])
        assert code == 0
        lines = (out / "telemetry.jsonl").read_text().strip().splitlines()
        assert len(lines) == 30  # duration * control_rate
        summary = json.loads((out / "summary.json").read_text())
        assert summary["violations_true_clearance"] == 0
        assert summary["n_samples"] > 0

    def test_unfiltered_adversarial_records_violations(self, tmp_path):
        sc = static_clutter_scenario(seed=1, dims=48, duration=3.0)
        path = tmp_path / "adv.json"
        save_scenario(sc, path)
        out = tmp_path / "out"
        code = main(["run", str(path), "--out", str(out), "--unfiltered"])
        summary = json.loads((out / "summary.json").read_text())
        assert code != 0 or summary["violations_true_clearance"] > 0
        assert summary["violations_true_clearance"] > 0

    def test_malformed_scenario_exit_two(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({
            "version": 1,
            "robot": {"model": "arm7"},
            "grid": {"bounds": {"min": [-1, -1, 0], "max": [1, 1, 2]},
                     "dims": [32, 32, 32]},
            "sampling": {"epsilon": 0.1, "delta": 0.01, "wrong_unit_key": 5},
            "episode": {"q0": [0, 0.9, 0, -1.3, 0, 1.9, 0.8]},
        }))
        code = main(["run", str(path), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "wrong_unit_key" in capsys.readouterr().err

    def test_abort_exit_three(self, tmp_path):
        doc = {
            "version": 1,
            "robot": {"model": "arm7"},
            "grid": {"bounds": {"min": [-1, -1, 0], "max": [1, 1, 2]},
                     "dims": [32, 32, 32]},
            "sampling": {"epsilon": 0.1, "delta": 0.01},
            "obstacles": [{"shape": {"kind": "box", "position": [0, 0, 1],
                                     "half_extents": [2.0, 2.0, 2.0]}}],
            "episode": {"q0": [0, 0.9, 0, -1.3, 0, 1.9, 0.8], "duration": 0.2},
        }
        path = tmp_path / "swallowed.json"
        path.write_text(json.dumps(doc))
        code = main(["run", str(path), "--out", str(tmp_path / "o")])
        assert code == 3

    def test_ticks_override_and_field_dumps(self, static_file, tmp_path):
        out = tmp_path / "out"
        code = main(["run", str(static_file), "--out", str(out),
                     "--ticks", "7", "--dump-fields", "5"])
        assert code == 0
        lines = (out / "telemetry.jsonl").read_text().strip().splitlines()
        assert len(lines) == 7
        assert (out / "field_000000.bin").exists()
        assert (out / "field_000005.bin").exists()

    def test_summarize_subcommand(self, static_file, tmp_path, capsys):
        out = tmp_path / "out"
        main(["run", str(static_file), "--out", str(out)])
        capsys.readouterr()  # drop the run's status line
        code = main(["summarize", str(out / "telemetry.jsonl")])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["ticks"] == 30


class TestLiveSession:
    @pytest.fixture
    def app(self, tmp_path):
        sc = moving_sphere_scenario(seed=3, dims=32, duration=5.0,
                                    control_rate=50.0)
        return build_app(sc)

    def test_scene_then_state_frames(self, app):
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                scene = json.loads(ws.receive_text())
                assert scene["type"] == "scene"
                assert scene["n_joints"] == 7
                frame = json.loads(ws.receive_text())
                assert frame["type"] == "state"
                assert len(frame["q"]) == 7
                assert len(frame["samples"]) > 0
                assert frame["slice"]["values"]

    def test_set_target_applies_within_two_ticks(self, app):
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()  # scene
                json.loads(ws.receive_text())
                target = [0.35, 0.2, 0.6]
                ws.send_text(json.dumps({"type": "set_target", "point": target,
                                         "client_time": 0}))
                # commands apply between ticks: every frame at least two
                # control ticks after the first post-send frame must carry
                # the new target
                deadline = time.time() + 5.0
                first_after = None
                applied_tick = None
                while time.time() < deadline:
                    frame = json.loads(ws.receive_text())
                    if frame.get("type") != "state":
                        continue
                    if first_after is None:
                        first_after = frame["tick"]
                    if frame.get("target") == target:
                        applied_tick = frame["tick"]
                        break
                    assert frame["tick"] < first_after + 2, \
                        "target not reflected within two control ticks"
                assert applied_tick is not None

    def test_malformed_command_error_frame_session_survives(self, app):
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                ws.send_text("not json at all")
                err = None
                for _ in range(10):
                    msg = json.loads(ws.receive_text())
                    if msg["type"] == "error":
                        err = msg
                        break
                assert err is not None
                ws.send_text(json.dumps({"type": "set_target",
                                         "point": [5.0, 0.0, 0.5]}))
                err2 = None
                for _ in range(10):
                    msg = json.loads(ws.receive_text())
                    if msg["type"] == "error":
                        err2 = msg
                        break
                assert err2 is not None and "bounds" in err2["message"]
                # still alive: state frames keep flowing
                assert any(json.loads(ws.receive_text())["type"] == "state"
                           for _ in range(5))

    def test_pause_freezes_time_and_state(self, app):
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                ws.send_text(json.dumps({"type": "pause"}))
                time.sleep(0.3)
                frames = []
                deadline = time.time() + 3.0
                while len(frames) < 2 and time.time() < deadline:
                    msg = json.loads(ws.receive_text())
                    if msg["type"] == "state" and msg["paused"]:
                        frames.append(msg)
                        time.sleep(0.15)
                # keepalive frames during pause carry the frozen state
                assert len(frames) >= 2
                assert frames[0]["t"] == frames[1]["t"]
                assert frames[0]["q"] == frames[1]["q"]
                ws.send_text(json.dumps({"type": "resume"}))
                frozen_t = frames[-1]["t"]
                resumed = None
                deadline = time.time() + 3.0
                while time.time() < deadline:
                    msg = json.loads(ws.receive_text())
                    if msg["type"] == "state" and not msg["paused"]:
                        resumed = msg
                        break
                assert resumed is not None
                assert resumed["t"] >= frozen_t

    def test_move_obstacle_keeps_min_h_nonnegative(self, app):
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                # drag the obstacle across the arm's home region
                xs = np.linspace(0.65, 0.15, 8)
                min_h_seen = []
                for x in xs:
                    ws.send_text(json.dumps({
                        "type": "move_obstacle", "index": 0,
                        "position": [float(x), 0.0, 0.6]}))
                    deadline = time.time() + 2.0
                    while time.time() < deadline:
                        msg = json.loads(ws.receive_text())
                        if msg.get("type") == "state":
                            min_h_seen.append(msg["telemetry"]["min_h_samples"])
                            break
                assert min_h_seen
                assert min(min_h_seen) >= 0.0

    def test_telemetry_endpoint_matches_frames(self, app):
        with TestClient(app) as client:
            with client.websocket_connect("/ws") as ws:
                ws.receive_text()
                frame = None
                for _ in range(5):
                    msg = json.loads(ws.receive_text())
                    if msg["type"] == "state":
                        frame = msg
                        break
            assert frame is not None
            rows = [json.loads(line) for line in
                    client.get("/telemetry.jsonl").text.strip().splitlines()]
            by_t = {row["t"]: row for row in rows}
            # the broadcast scalars must match the logged record bit-for-bit
            row = by_t[frame["t"]]
            assert row["min_h_samples"] == frame["telemetry"]["min_h_samples"]
            assert row["qp_time"] == frame["telemetry"]["qp_time"]
