// Orbit camera with a simple perspective projection onto the canvas, plus
// the inverse ray casts the drag interactions need. All math is kept here so
// it can be unit tested without a DOM.

import { Vec3 } from "./protocol.js";

export interface Projected {
  x: number;
  y: number;
  depth: number; // camera-space distance, for painter's sorting and sizing
}

export class OrbitCamera {
  yaw = -0.7;
  pitch = 0.45;
  distance = 3.2;
  center: Vec3 = [0, 0, 0.7];
  fov = 900; // projection scale in pixels at unit depth

  basis(): { right: Vec3; up: Vec3; forward: Vec3; eye: Vec3 } {
    const cy = Math.cos(this.yaw), sy = Math.sin(this.yaw);
    const cp = Math.cos(this.pitch), sp = Math.sin(this.pitch);
    // z-up world; forward points from the eye toward the center
    const forward: Vec3 = [cp * cy, cp * sy, -sp];
    const right: Vec3 = [-sy, cy, 0];
    const up: Vec3 = [
      right[1] * forward[2] - right[2] * forward[1],
      right[2] * forward[0] - right[0] * forward[2],
      right[0] * forward[1] - right[1] * forward[0],
    ];
    const eye: Vec3 = [
      this.center[0] - forward[0] * this.distance,
      this.center[1] - forward[1] * this.distance,
      this.center[2] - forward[2] * this.distance,
    ];
    return { right, up, forward, eye };
  }

  project(p: Vec3, width: number, height: number): Projected | null {
    const { right, up, forward, eye } = this.basis();
    const d: Vec3 = [p[0] - eye[0], p[1] - eye[1], p[2] - eye[2]];
    const depth = d[0] * forward[0] + d[1] * forward[1] + d[2] * forward[2];
    if (depth <= 0.05) return null;
    const x = d[0] * right[0] + d[1] * right[1] + d[2] * right[2];
    const y = d[0] * up[0] + d[1] * up[1] + d[2] * up[2];
    return {
      x: width / 2 + (this.fov * x) / depth,
      y: height / 2 - (this.fov * y) / depth,
      depth,
    };
  }

  // ray through a canvas pixel, for plane intersection
  ray(px: number, py: number, width: number, height: number): { origin: Vec3; dir: Vec3 } {
    const { right, up, forward, eye } = this.basis();
    const nx = (px - width / 2) / this.fov;
    const ny = (height / 2 - py) / this.fov;
    const dir: Vec3 = [
      forward[0] + nx * right[0] + ny * up[0],
      forward[1] + nx * right[1] + ny * up[1],
      forward[2] + nx * right[2] + ny * up[2],
    ];
    const n = Math.hypot(dir[0], dir[1], dir[2]);
    return { origin: eye, dir: [dir[0] / n, dir[1] / n, dir[2] / n] };
  }

  // intersection of the pixel ray with the horizontal plane z = planeZ
  pickOnHorizontalPlane(px: number, py: number, width: number, height: number,
                        planeZ: number): Vec3 | null {
    const { origin, dir } = this.ray(px, py, width, height);
    if (Math.abs(dir[2]) < 1e-9) return null;
    const t = (planeZ - origin[2]) / dir[2];
    if (t <= 0) return null;
    return [origin[0] + t * dir[0], origin[1] + t * dir[1], planeZ];
  }
}
