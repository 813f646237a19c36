// Wire types for the live-session WebSocket: the server broadcasts scene and
// state frames as JSON text; the client sends commands with a `type` tag.

export type Vec3 = [number, number, number];

export interface CapsuleDef {
  p0: Vec3;
  p1: Vec3;
  radius: number;
}

export interface SceneFrame {
  type: "scene";
  bounds: { min: Vec3; max: Vec3 };
  links: { link_index: number; capsules: CapsuleDef[] }[];
  obstacles: { kind: string; radius: number; half_length: number; half_extents?: Vec3 }[];
  sample_links: number[];
  epsilon: number;
  control_rate: number;
  n_joints: number;
}

export interface PoseLike {
  position: Vec3;
  quaternion: [number, number, number, number]; // (w, x, y, z)
}

export interface StateFrame {
  type: "state";
  t: number;
  tick: number;
  paused: boolean;
  q: number[];
  link_poses: PoseLike[];
  samples: { link: number; position: Vec3; h: number }[];
  obstacles: PoseLike[];
  target: Vec3 | null;
  slice: { axis: string; offset: number; plane_index: number; values: number[][] };
  telemetry: {
    min_h_samples: number;
    min_true_clearance: number;
    slack: number;
    qp_time: number;
    pde_time: number;
    qp_status: string;
  };
}

export interface ErrorFrame {
  type: "error";
  message: string;
}

export type ServerFrame = SceneFrame | StateFrame | ErrorFrame;

export type LiveCommand =
  | { type: "set_target"; point: Vec3; client_time: number }
  | { type: "move_obstacle"; index: number; position: Vec3; client_time: number }
  | { type: "set_nominal_mode"; mode: "hold_q" | "external" }
  | { type: "set_gain"; name: string; value: number }
  | { type: "pause" }
  | { type: "resume" }
  | { type: "reset" };

export function parseServerFrame(text: string): ServerFrame | null {
  try {
    const obj = JSON.parse(text);
    if (obj && (obj.type === "scene" || obj.type === "state" || obj.type === "error")) {
      return obj as ServerFrame;
    }
  } catch {
    /* malformed frames are dropped */
  }
  return null;
}

export function encodeCommand(cmd: LiveCommand): string {
  return JSON.stringify(cmd);
}

export function clampToBounds(p: Vec3, min: Vec3, max: Vec3): Vec3 {
  return [
    Math.min(Math.max(p[0], min[0]), max[0]),
    Math.min(Math.max(p[1], min[1]), max[1]),
    Math.min(Math.max(p[2], min[2]), max[2]),
  ];
}
