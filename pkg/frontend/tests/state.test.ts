import { describe, expect, it } from "vitest";
import { parseTrace, type Summary } from "../src/formats.js";
import {
  clampScrub,
  collisionMarkers,
  currentFrame,
  DELTA_KEYS,
  fnv1a64,
  formatSeconds,
  initialState,
  summaryDelta,
} from "../src/state.js";
import { fixture } from "./helpers.js";

const planar = parseTrace(fixture("small_plate.trace"));
const crash = parseTrace(fixture("crash.trace"));

describe("clampScrub", () => {
  it("clamps into the frame range", () => {
    expect(clampScrub(planar, -5)).toBe(0);
    expect(clampScrub(planar, 0)).toBe(0);
    expect(clampScrub(planar, planar.frames.length + 50)).toBe(planar.frames.length - 1);
    expect(clampScrub(planar, 2.7)).toBe(2);
  });

  it("returns 0 without a trace", () => {
    expect(clampScrub(null, 42)).toBe(0);
  });
});

describe("currentFrame", () => {
  it("is pure: the same scrub index yields the same frame object", () => {
    const state = { ...initialState(), trace: planar, scrub: 17 };
    expect(currentFrame(state)).toBe(currentFrame(state));
    expect(currentFrame(state)).toBe(planar.frames[17]);
  });

  it("is null without a trace", () => {
    expect(currentFrame(initialState())).toBeNull();
  });
});

describe("collisionMarkers", () => {
  it("finds no markers in the planar trace", () => {
    expect(collisionMarkers(planar)).toEqual([]);
  });

  it("yields one marker per flagged frame with its details", () => {
    const markers = collisionMarkers(crash);
    expect(markers.length).toBe(crash.frames.filter((f) => f.flags.length > 0).length);
    expect(markers.length).toBe(2);
    expect(markers[0].index).toBe(0);
    expect(markers[1].index).toBe(1);
    expect(markers[1].flags).toContain("collision_bed");
    expect(markers[1].clearance).toBeLessThan(0);
  });
});

describe("summaryDelta", () => {
  const before: Summary = new Map([
    ["time_min", 0.5],
    ["max_speed_v", 7200],
    ["speed_violations", 3],
  ]);
  const after: Summary = new Map([
    ["time_min", 0.6],
    ["max_speed_v", 7200],
    ["speed_violations", 0],
  ]);

  it("has null changes when there is no previous run", () => {
    for (const delta of summaryDelta(null, after)) {
      expect(delta.before).toBeNull();
      expect(delta.change).toBeNull();
    }
  });

  it("computes per-key changes in DELTA_KEYS order", () => {
    const deltas = summaryDelta(before, after);
    const keys = deltas.map((d) => d.key);
    expect(keys).toEqual(DELTA_KEYS.filter((k) => after.has(k)));
    const byKey = new Map(deltas.map((d) => [d.key, d]));
    expect(byKey.get("time_min")?.change).toBeCloseTo(0.1, 12);
    expect(byKey.get("max_speed_v")?.change).toBe(0);
    expect(byKey.get("speed_violations")?.change).toBe(-3);
  });
});

describe("fnv1a64", () => {
  it("matches reference vectors", () => {
    expect(fnv1a64("")).toBe("cbf29ce484222325");
    expect(fnv1a64("a")).toBe("af63dc4c8601ec8c");
    expect(fnv1a64("hello")).toBe("a430d84680aabd0b");
    expect(fnv1a64("G21\nG90\nM83\n")).toBe("dadf0adb7eb6c0bd");
  });

  it("is stable and input-sensitive", () => {
    const gcode = fixture("small_plate.gcode");
    expect(fnv1a64(gcode)).toBe(fnv1a64(gcode));
    expect(fnv1a64(gcode)).not.toBe(fnv1a64(gcode + "\n"));
  });
});

describe("formatSeconds", () => {
  it("renders m:ss.t", () => {
    expect(formatSeconds(0)).toBe("0:00.0");
    expect(formatSeconds(35.8)).toBe("0:35.8");
    expect(formatSeconds(61.5)).toBe("1:01.5");
  });

  it("renders a dash for non-finite input", () => {
    expect(formatSeconds(Infinity)).toBe("-");
  });
});
