/**
 * Viewer state and the pure functions that advance it. Rendering and DOM
 * code consume the values computed here; nothing in this module touches
 * the network or the scene, which keeps scrubbing deterministic: deriving
 * frame k twice always yields the same readouts.
 */

import type { Summary, Trace, TraceFrame } from "./formats.js";

export interface CollisionMarker {
  /** Frame index to jump to. */
  index: number;
  time: number;
  flags: string[];
  clearance: number;
}

export interface RunResult {
  summary: Summary;
  gcodeHash: string;
  trace: Trace;
}

export interface ViewerState {
  trace: Trace | null;
  scrub: number;
  lastRun: RunResult | null;
  previousRun: RunResult | null;
}

export function initialState(): ViewerState {
  return { trace: null, scrub: 0, lastRun: null, previousRun: null };
}

export function clampScrub(trace: Trace | null, index: number): number {
  if (trace === null || trace.frames.length === 0) return 0;
  return Math.min(Math.max(Math.trunc(index), 0), trace.frames.length - 1);
}

export function currentFrame(state: ViewerState): TraceFrame | null {
  if (state.trace === null || state.trace.frames.length === 0) return null;
  return state.trace.frames[clampScrub(state.trace, state.scrub)];
}

/** One marker per frame that carries any flag, in frame order. */
export function collisionMarkers(trace: Trace): CollisionMarker[] {
  return trace.frames
    .filter((f) => f.flags.length > 0)
    .map((f) => ({ index: f.index, time: f.time, flags: [...f.flags], clearance: f.clearance }));
}

export interface SummaryDelta {
  key: string;
  before: number | null;
  after: number;
  change: number | null;
}

/** Keys worth badging when a re-slice lands, in display order. */
export const DELTA_KEYS = [
  "time_min",
  "max_speed_x",
  "max_speed_y",
  "max_speed_z",
  "max_speed_u",
  "max_speed_v",
  "max_speed_e",
  "speed_violations",
  "range_violations",
  "clamped_segments",
];

export function summaryDelta(previous: Summary | null, next: Summary): SummaryDelta[] {
  const deltas: SummaryDelta[] = [];
  for (const key of DELTA_KEYS) {
    const after = next.get(key);
    if (after === undefined) continue;
    const before = previous?.get(key) ?? null;
    deltas.push({
      key,
      before,
      after,
      change: before === null ? null : after - before,
    });
  }
  return deltas;
}

/**
 * FNV-1a 64-bit over UTF-8 bytes, as 16 hex digits. Used to badge gcode
 * identity across runs: equal inputs re-slice to equal hashes.
 */
export function fnv1a64(text: string): string {
  const bytes = new TextEncoder().encode(text);
  let hash = 0xcbf29ce484222325n;
  const prime = 0x100000001b3n;
  const mask = 0xffffffffffffffffn;
  for (const byte of bytes) {
    hash ^= BigInt(byte);
    hash = (hash * prime) & mask;
  }
  return hash.toString(16).padStart(16, "0");
}

/** Seconds rendered as "m:ss.t" for scrub readouts. */
export function formatSeconds(seconds: number): string {
  if (!Number.isFinite(seconds)) return "-";
  const minutes = Math.floor(seconds / 60);
  const rest = seconds - minutes * 60;
  return `${minutes}:${rest.toFixed(1).padStart(4, "0")}`;
}
