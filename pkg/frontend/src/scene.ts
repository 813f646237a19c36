// Canvas renderer for the live scene: workspace box, link capsules, surface
// samples colored by their safety value, obstacles, the field heatmap slice,
// and the drag target. Pure painter's algorithm; the UI computes no physics,
// every scalar drawn comes from a received frame.

import { OrbitCamera } from "./camera.js";
import { divergingColor, linkColor } from "./colormap.js";
import { PoseLike, SceneFrame, StateFrame, Vec3 } from "./protocol.js";

export function rotatePoint(q: [number, number, number, number], p: Vec3): Vec3 {
  const [w, x, y, z] = q;
  // q * p * q^-1 expanded
  const uvx = y * p[2] - z * p[1];
  const uvy = z * p[0] - x * p[2];
  const uvz = x * p[1] - y * p[0];
  const uuvx = y * uvz - z * uvy;
  const uuvy = z * uvx - x * uvz;
  const uuvz = x * uvy - y * uvx;
  return [
    p[0] + 2 * (w * uvx + uuvx),
    p[1] + 2 * (w * uvy + uuvy),
    p[2] + 2 * (w * uvz + uuvz),
  ];
}

export function applyPose(pose: PoseLike, p: Vec3): Vec3 {
  const r = rotatePoint(pose.quaternion, p);
  return [r[0] + pose.position[0], r[1] + pose.position[1], r[2] + pose.position[2]];
}

export class SceneRenderer {
  camera = new OrbitCamera();
  hScale = 0.5; // color scale for h values; adapts to the scene

  constructor(private canvas: HTMLCanvasElement) {}

  render(scene: SceneFrame | null, state: StateFrame | null, stale: boolean): void {
    const ctx = this.canvas.getContext("2d")!;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, width, height);
    if (!scene) {
      ctx.fillStyle = "#8899aa";
      ctx.font = "14px sans-serif";
      ctx.fillText("waiting for session...", 20, 30);
      return;
    }
    this.drawSlice(ctx, scene, state);
    this.drawWorkspace(ctx, scene);
    if (state) {
      this.drawObstacles(ctx, scene, state);
      this.drawLinks(ctx, scene, state);
      this.drawSamples(ctx, state);
      this.drawTarget(ctx, state);
    }
    if (stale) {
      ctx.fillStyle = "#ff5566";
      ctx.font = "bold 16px sans-serif";
      ctx.fillText("STALE -- no frames from server", 20, 28);
    }
  }

  private line3(ctx: CanvasRenderingContext2D, a: Vec3, b: Vec3): void {
    const { width, height } = this.canvas;
    const pa = this.camera.project(a, width, height);
    const pb = this.camera.project(b, width, height);
    if (!pa || !pb) return;
    ctx.beginPath();
    ctx.moveTo(pa.x, pa.y);
    ctx.lineTo(pb.x, pb.y);
    ctx.stroke();
  }

  private drawWorkspace(ctx: CanvasRenderingContext2D, scene: SceneFrame): void {
    const { min, max } = scene.bounds;
    const c: Vec3[] = [];
    for (const x of [min[0], max[0]])
      for (const y of [min[1], max[1]])
        for (const z of [min[2], max[2]]) c.push([x, y, z]);
    const edges = [
      [0, 1], [2, 3], [4, 5], [6, 7],
      [0, 2], [1, 3], [4, 6], [5, 7],
      [0, 4], [1, 5], [2, 6], [3, 7],
    ];
    ctx.strokeStyle = "#2e3b4a";
    ctx.lineWidth = 1;
    for (const [i, j] of edges) this.line3(ctx, c[i], c[j]);
  }

  private drawSlice(ctx: CanvasRenderingContext2D, scene: SceneFrame,
                    state: StateFrame | null): void {
    if (!state || !state.slice.values.length) return;
    const { min, max } = scene.bounds;
    const vals = state.slice.values;
    const n0 = vals.length, n1 = vals[0].length;
    // slice axes for an axis-aligned plane: y-slice spans (x, z) etc.
    const axis = state.slice.axis;
    const offset = state.slice.offset;
    const peak = Math.max(this.hScale, 1e-6);
    const { width, height } = this.canvas;
    const step = Math.max(1, Math.floor(n0 / 48));
    for (let i = 0; i < n0 - step; i += step) {
      for (let j = 0; j < n1 - step; j += step) {
        const v = vals[i][j];
        const corner = (a: number, b: number): Vec3 => {
          const u0 = min[0] + ((a + 0.5) / n0) * (max[0] - min[0]);
          const u1 = min[1] + ((a + 0.5) / n0) * (max[1] - min[1]);
          const w1 = min[1] + ((b + 0.5) / n1) * (max[1] - min[1]);
          const w2 = min[2] + ((b + 0.5) / n1) * (max[2] - min[2]);
          if (axis === "x") return [offset, u1, w2];
          if (axis === "y") return [u0, offset, w2];
          return [u0, w1, offset];
        };
        const p = this.camera.project(corner(i, j), width, height);
        const p2 = this.camera.project(corner(i + step, j + step), width, height);
        if (!p || !p2) continue;
        ctx.fillStyle = divergingColor(v, peak);
        ctx.globalAlpha = 0.35;
        const x = Math.min(p.x, p2.x), y = Math.min(p.y, p2.y);
        ctx.fillRect(x, y, Math.abs(p2.x - p.x) + 1, Math.abs(p2.y - p.y) + 1);
        ctx.globalAlpha = 1.0;
      }
    }
  }

  private drawLinks(ctx: CanvasRenderingContext2D, scene: SceneFrame,
                    state: StateFrame): void {
    const { width, height } = this.canvas;
    for (const link of scene.links) {
      const pose = state.link_poses[link.link_index];
      if (!pose) continue;
      for (const cap of link.capsules) {
        const a = applyPose(pose, cap.p0);
        const b = applyPose(pose, cap.p1);
        const pa = this.camera.project(a, width, height);
        if (!pa) continue;
        const px = (this.camera.fov * cap.radius) / pa.depth;
        ctx.strokeStyle = linkColor(link.link_index);
        ctx.lineWidth = Math.max(2, 2 * px);
        ctx.lineCap = "round";
        this.line3(ctx, a, b);
      }
    }
    ctx.lineCap = "butt";
  }

  private drawSamples(ctx: CanvasRenderingContext2D, state: StateFrame): void {
    const { width, height } = this.canvas;
    let minH = Infinity;
    let minIdx = -1;
    state.samples.forEach((s, i) => {
      if (s.h < minH) {
        minH = s.h;
        minIdx = i;
      }
    });
    // adapt the color scale to the typical field magnitude
    const maxH = state.samples.reduce((m, s) => Math.max(m, s.h), 0.01);
    this.hScale = 0.9 * this.hScale + 0.1 * maxH;
    state.samples.forEach((s, i) => {
      const p = this.camera.project(s.position, width, height);
      if (!p) return;
      ctx.beginPath();
      ctx.arc(p.x, p.y, i === minIdx ? 6 : 3.5, 0, 2 * Math.PI);
      ctx.fillStyle = divergingColor(s.h, this.hScale);
      ctx.fill();
      if (i === minIdx) {
        ctx.strokeStyle = "#ffffff";
        ctx.lineWidth = 1.5;
        ctx.stroke();
      }
    });
  }

  private drawObstacles(ctx: CanvasRenderingContext2D, scene: SceneFrame,
                        state: StateFrame): void {
    const { width, height } = this.canvas;
    state.obstacles.forEach((pose, i) => {
      const def = scene.obstacles[i];
      if (!def) return;
      const p = this.camera.project(pose.position, width, height);
      if (!p) return;
      ctx.strokeStyle = "#e0b050";
      ctx.lineWidth = 2;
      if (def.kind === "sphere") {
        ctx.beginPath();
        ctx.arc(p.x, p.y, (this.camera.fov * def.radius) / p.depth, 0, 2 * Math.PI);
        ctx.stroke();
      } else if (def.kind === "capsule") {
        const axis = rotatePoint(pose.quaternion, [0, 0, def.half_length]);
        const a: Vec3 = [pose.position[0] - axis[0], pose.position[1] - axis[1], pose.position[2] - axis[2]];
        const b: Vec3 = [pose.position[0] + axis[0], pose.position[1] + axis[1], pose.position[2] + axis[2]];
        ctx.lineWidth = Math.max(2, (2 * this.camera.fov * def.radius) / p.depth);
        ctx.lineCap = "round";
        this.line3(ctx, a, b);
        ctx.lineCap = "butt";
      } else if (def.half_extents) {
        const he = def.half_extents;
        const corners: Vec3[] = [];
        for (const sx of [-1, 1])
          for (const sy of [-1, 1])
            for (const sz of [-1, 1])
              corners.push(applyPose(pose, [sx * he[0], sy * he[1], sz * he[2]]));
        const edges = [
          [0, 1], [2, 3], [4, 5], [6, 7],
          [0, 2], [1, 3], [4, 6], [5, 7],
          [0, 4], [1, 5], [2, 6], [3, 7],
        ];
        for (const [ii, jj] of edges) this.line3(ctx, corners[ii], corners[jj]);
      }
    });
  }

  private drawTarget(ctx: CanvasRenderingContext2D, state: StateFrame): void {
    if (!state.target) return;
    const { width, height } = this.canvas;
    const p = this.camera.project(state.target, width, height);
    if (!p) return;
    ctx.strokeStyle = "#55ff99";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 8, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(p.x - 12, p.y);
    ctx.lineTo(p.x + 12, p.y);
    ctx.moveTo(p.x, p.y - 12);
    ctx.lineTo(p.x, p.y + 12);
    ctx.stroke();
  }
}
