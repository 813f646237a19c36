// Drag-to-command plumbing: interaction modes, client-side bounds clamping,
// and a latest-wins rate limiter so pointer events never exceed the server's
// command budget.

import { LiveCommand, Vec3, clampToBounds } from "./protocol.js";

export type Mode = { kind: "observe" } | { kind: "target" } | { kind: "obstacle"; index: number };

export class CommandRateLimiter {
  private lastSent = -Infinity;
  private pending: LiveCommand | null = null;
  constructor(private minIntervalMs: number = 1000 / 30) {}

  // returns the command to send now (latest-wins), or null to hold
  offer(cmd: LiveCommand, nowMs: number): LiveCommand | null {
    if (nowMs - this.lastSent >= this.minIntervalMs) {
      this.lastSent = nowMs;
      this.pending = null;
      return cmd;
    }
    this.pending = cmd;
    return null;
  }

  // drains the held command once the interval has elapsed
  flush(nowMs: number): LiveCommand | null {
    if (this.pending && nowMs - this.lastSent >= this.minIntervalMs) {
      const cmd = this.pending;
      this.pending = null;
      this.lastSent = nowMs;
      return cmd;
    }
    return null;
  }
}

export interface DragContext {
  mode: Mode;
  bounds: { min: Vec3; max: Vec3 };
}

// Maps a world-space gesture point to the outgoing command for the current
// mode; observe mode never commands. Points are clamped to the workspace.
export function dragToCommand(ctx: DragContext, world: Vec3,
                              nowMs: number): LiveCommand | null {
  if (ctx.mode.kind === "observe") return null;
  const clamped = clampToBounds(world, ctx.bounds.min, ctx.bounds.max);
  if (ctx.mode.kind === "target") {
    return { type: "set_target", point: clamped, client_time: nowMs };
  }
  return {
    type: "move_obstacle",
    index: ctx.mode.index,
    position: clamped,
    client_time: nowMs,
  };
}

export function wasClamped(world: Vec3, bounds: { min: Vec3; max: Vec3 }): boolean {
  const c = clampToBounds(world, bounds.min, bounds.max);
  return c[0] !== world[0] || c[1] !== world[1] || c[2] !== world[2];
}
