import { describe, expect, it } from "vitest";

import { clampToBounds, encodeCommand, parseServerFrame } from "../src/protocol.js";
import { applyPose, rotatePoint } from "../src/scene.js";
import { divergingColor } from "../src/colormap.js";

describe("frame parsing", () => {
  it("accepts tagged frames", () => {
    const f = parseServerFrame('{"type":"state","t":1.0,"tick":50}');
    expect(f?.type).toBe("state");
  });

  it("drops malformed text", () => {
    expect(parseServerFrame("{nope")).toBeNull();
    expect(parseServerFrame('{"foo":1}')).toBeNull();
  });

  it("command encoding round-trips", () => {
    const text = encodeCommand({ type: "set_gain", name: "alpha", value: 2.5 });
    expect(JSON.parse(text)).toEqual({ type: "set_gain", name: "alpha", value: 2.5 });
  });
});

describe("clampToBounds", () => {
  it("is identity inside and projects outside", () => {
    const min: [number, number, number] = [-1, -1, 0];
    const max: [number, number, number] = [1, 1, 2];
    expect(clampToBounds([0.5, 0, 1], min, max)).toEqual([0.5, 0, 1]);
    expect(clampToBounds([2, -9, 1], min, max)).toEqual([1, -1, 1]);
  });
});

describe("pose math", () => {
  it("identity quaternion leaves points unchanged", () => {
    expect(rotatePoint([1, 0, 0, 0], [0.1, 0.2, 0.3])).toEqual([0.1, 0.2, 0.3]);
  });

  it("90-degree z rotation maps x to y", () => {
    const s = Math.SQRT1_2;
    const r = rotatePoint([s, 0, 0, s], [1, 0, 0]);
    expect(r[0]).toBeCloseTo(0, 12);
    expect(r[1]).toBeCloseTo(1, 12);
    expect(r[2]).toBeCloseTo(0, 12);
  });

  it("applyPose composes rotation then translation", () => {
    const s = Math.SQRT1_2;
    const out = applyPose({ position: [1, 2, 3], quaternion: [s, 0, 0, s] },
                          [1, 0, 0]);
    expect(out[0]).toBeCloseTo(1, 12);
    expect(out[1]).toBeCloseTo(3, 12);
    expect(out[2]).toBeCloseTo(3, 12);
  });
});

describe("diverging colormap", () => {
  it("is red-ish below zero and blue-green above", () => {
    const neg = divergingColor(-1, 1);
    const pos = divergingColor(1, 1);
    const [nr, ng] = neg.match(/\d+/g)!.map(Number);
    const [pr, , pb] = pos.match(/\d+/g)!.map(Number);
    expect(nr).toBeGreaterThan(ng);
    expect(pb).toBeGreaterThan(pr);
  });

  it("saturates outside the scale", () => {
    expect(divergingColor(99, 1)).toBe(divergingColor(1, 1));
  });
});
