// Session wiring: socket -> view state -> render loop; pointer events ->
// rate-limited commands. The ring buffers are the only mutable view state.

import { StripCharts } from "./charts.js";
import { CommandRateLimiter, Mode, dragToCommand } from "./input.js";
import { SessionSocket } from "./net.js";
import { RingBuffer } from "./ring.js";
import { SceneRenderer } from "./scene.js";
import { SceneFrame, StateFrame, Vec3, encodeCommand } from "./protocol.js";

const sceneCanvas = document.getElementById("scene") as HTMLCanvasElement;
const chartCanvas = document.getElementById("charts") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const modeSel = document.getElementById("mode") as HTMLSelectElement;
const errorEl = document.getElementById("errors")!;

let scene: SceneFrame | null = null;
let state: StateFrame | null = null;
let mode: Mode = { kind: "observe" };

const buffers = {
  minH: new RingBuffer(30),
  clearance: new RingBuffer(30),
  slack: new RingBuffer(30),
  qpTime: new RingBuffer(30),
};
const charts = new StripCharts(chartCanvas, [
  { label: "min h over samples", color: "#58c6ff", buffer: buffers.minH },
  { label: "true clearance (m)", color: "#7de07d", buffer: buffers.clearance },
  { label: "task slack", color: "#e0c060", buffer: buffers.slack },
  { label: "qp time (s)", color: "#c58fff", buffer: buffers.qpTime },
]);

const renderer = new SceneRenderer(sceneCanvas);
const limiter = new CommandRateLimiter();

const proto = location.protocol === "https:" ? "wss" : "ws";
const socket = new SessionSocket(`${proto}://${location.host}/ws`, (frame) => {
  if (frame.type === "scene") {
    scene = frame;
    populateModes(frame);
  } else if (frame.type === "state") {
    state = frame;
    buffers.minH.push(frame.t, frame.telemetry.min_h_samples);
    buffers.clearance.push(frame.t, frame.telemetry.min_true_clearance);
    buffers.slack.push(frame.t, frame.telemetry.slack);
    buffers.qpTime.push(frame.t, frame.telemetry.qp_time);
  } else {
    errorEl.textContent = frame.message;
    setTimeout(() => { errorEl.textContent = ""; }, 4000);
  }
});
socket.open();

function populateModes(sc: SceneFrame): void {
  while (modeSel.options.length > 2) modeSel.remove(2);
  sc.obstacles.forEach((_, i) => {
    const opt = document.createElement("option");
    opt.value = `obstacle:${i}`;
    opt.textContent = `drag obstacle ${i}`;
    modeSel.add(opt);
  });
}

modeSel.addEventListener("change", () => {
  const v = modeSel.value;
  if (v === "observe") mode = { kind: "observe" };
  else if (v === "target") mode = { kind: "target" };
  else mode = { kind: "obstacle", index: parseInt(v.split(":")[1], 10) };
});

for (const id of ["pause", "resume", "reset"]) {
  document.getElementById(id)!.addEventListener("click", () => {
    socket.send(encodeCommand({ type: id as "pause" | "resume" | "reset" }));
  });
}

// -- camera + drag handling -------------------------------------------------

let dragging = false;
let orbiting = false;
let lastPointer: [number, number] = [0, 0];
let dragPlaneZ = 0.5;

function canvasPos(ev: PointerEvent): [number, number] {
  const rect = sceneCanvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) / rect.width) * sceneCanvas.width,
    ((ev.clientY - rect.top) / rect.height) * sceneCanvas.height,
  ];
}

function entityZ(): number {
  if (!state) return 0.5;
  if (mode.kind === "obstacle") {
    const pose = state.obstacles[mode.index];
    return pose ? pose.position[2] : 0.5;
  }
  if (state.target) return state.target[2];
  return 0.5;
}

sceneCanvas.addEventListener("pointerdown", (ev) => {
  lastPointer = canvasPos(ev);
  if (mode.kind === "observe" || ev.button !== 0 || ev.shiftKey) {
    orbiting = true;
  } else {
    dragging = true;
    dragPlaneZ = entityZ();
    sendDrag(ev);
  }
  sceneCanvas.setPointerCapture(ev.pointerId);
});

sceneCanvas.addEventListener("pointermove", (ev) => {
  const pos = canvasPos(ev);
  if (orbiting) {
    renderer.camera.yaw -= (pos[0] - lastPointer[0]) * 0.01;
    renderer.camera.pitch = Math.min(1.4, Math.max(-0.2,
      renderer.camera.pitch + (pos[1] - lastPointer[1]) * 0.01));
  } else if (dragging) {
    sendDrag(ev);
  }
  lastPointer = pos;
});

sceneCanvas.addEventListener("pointerup", () => {
  dragging = false;
  orbiting = false;
});

sceneCanvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  renderer.camera.distance = Math.min(8, Math.max(1.2,
    renderer.camera.distance * (1 + 0.001 * ev.deltaY)));
});

function sendDrag(ev: PointerEvent): void {
  if (!scene) return;
  const [px, py] = canvasPos(ev);
  const world = renderer.camera.pickOnHorizontalPlane(
    px, py, sceneCanvas.width, sceneCanvas.height, dragPlaneZ);
  if (!world) return;
  const cmd = dragToCommand({ mode, bounds: scene.bounds }, world as Vec3,
                            performance.now());
  if (!cmd) return;
  const ready = limiter.offer(cmd, performance.now());
  if (ready) socket.send(encodeCommand(ready));
}

// -- render loop -------------------------------------------------------------

function frame(): void {
  const stale = socket.staleSeconds() > 1.0;
  renderer.render(scene, state, stale);
  charts.render(state ? state.t : 0);
  const held = limiter.flush(performance.now());
  if (held) socket.send(encodeCommand(held));
  if (state) {
    const st = state.telemetry;
    statusEl.textContent =
      `t=${state.t.toFixed(2)}s  tick=${state.tick}  qp=${st.qp_status}` +
      `  min h=${st.min_h_samples.toFixed(4)}  clearance=${st.min_true_clearance.toFixed(3)} m` +
      (state.paused ? "  [PAUSED]" : "");
  } else {
    statusEl.textContent = socket.connected ? "connected, waiting for state" : "connecting...";
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
