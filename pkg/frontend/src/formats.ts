/**
 * Parsers for the text formats the slicing service speaks: simulation
 * traces, slice summaries, display meshes, and the gcode section of a
 * slice response. Everything here is pure string work so it runs the
 * same in the browser and under vitest.
 */

export const TRACE_HEADER = "open5x-trace v1";
export const SUMMARY_HEADER = "open5x-summary v1";
export const MESH_HEADER = "open5x-mesh v1";
export const PARAMS_HEADER = "open5x-params v1";
export const MACHINE_HEADER = "open5x-machine v1";

export class FormatError extends Error {}

export interface TraceFrame {
  index: number;
  time: number;
  kind: string;
  x: number;
  y: number;
  z: number;
  u: number;
  v: number;
  e: number;
  f: number;
  /** Per-axis speeds for the segment arriving at this frame (x y z u v e). */
  speeds: [number, number, number, number, number, number];
  /** Row-major 3x3 bed rotation for this frame's U/V pose. */
  rotation: [number, number, number, number, number, number, number, number, number];
  /** Bed translation so the pivot stays fixed. */
  translation: [number, number, number];
  /** Worst nozzle clearance on the segment arriving here; Infinity when unconstrained. */
  clearance: number;
  flags: string[];
  offendingAxis: string | null;
}

export interface Trace {
  frames: TraceFrame[];
  /** Elapsed time of the last frame, in seconds; 0 for an empty trace. */
  totalTime: number;
}

const POSE_KEYS = ["x", "y", "z", "u", "v", "e", "f"] as const;
const SPEED_KEYS = ["sx", "sy", "sz", "su", "sv", "se"] as const;

function parseNumber(raw: string, where: string): number {
  if (raw === "inf") return Infinity;
  if (raw === "-inf") return -Infinity;
  const value = Number(raw);
  if (raw === "" || Number.isNaN(value)) {
    throw new FormatError(`${where}: not a number: ${JSON.stringify(raw)}`);
  }
  return value;
}

function parseTuple(raw: string, count: number, where: string): number[] {
  const parts = raw.split(",");
  if (parts.length !== count) {
    throw new FormatError(`${where}: expected ${count} comma-separated numbers`);
  }
  return parts.map((p) => parseNumber(p, where));
}

export function parseTrace(text: string): Trace {
  const lines = text.split("\n").map((l) => l.trim()).filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== TRACE_HEADER) {
    throw new FormatError(`missing header line "${TRACE_HEADER}"`);
  }
  const frames: TraceFrame[] = [];
  for (let i = 1; i < lines.length; i++) {
    const where = `line ${i + 1}`;
    const fields = new Map<string, string>();
    for (const token of lines[i].split(/\s+/)) {
      const eq = token.indexOf("=");
      if (eq < 0) {
        throw new FormatError(`${where}: expected key=value, got ${JSON.stringify(token)}`);
      }
      fields.set(token.slice(0, eq), token.slice(eq + 1));
    }
    const need = (key: string): string => {
      const value = fields.get(key);
      if (value === undefined) throw new FormatError(`${where}: missing field ${key}`);
      return value;
    };
    const pose = Object.fromEntries(
      POSE_KEYS.map((k) => [k, parseNumber(need(k), where)]),
    ) as Record<(typeof POSE_KEYS)[number], number>;
    const flagsRaw = need("flags");
    const axisRaw = need("axis");
    frames.push({
      index: parseNumber(need("index"), where),
      time: parseNumber(need("time"), where),
      kind: need("kind"),
      ...pose,
      speeds: SPEED_KEYS.map((k) => parseNumber(need(k), where)) as TraceFrame["speeds"],
      rotation: parseTuple(need("r"), 9, where) as TraceFrame["rotation"],
      translation: parseTuple(need("t"), 3, where) as TraceFrame["translation"],
      clearance: parseNumber(need("clearance"), where),
      flags: flagsRaw === "-" ? [] : flagsRaw.split(","),
      offendingAxis: axisRaw === "-" ? null : axisRaw,
    });
  }
  const totalTime = frames.length > 0 ? frames[frames.length - 1].time : 0;
  return { frames, totalTime };
}

export type Summary = Map<string, number>;

/**
 * Parse the key-value block between the summary header and its `end` line.
 * Returns the summary plus the number of raw lines it consumed, so a slice
 * response can be split into summary and gcode.
 */
export function parseSummary(text: string): { summary: Summary; consumedLines: number } {
  const lines = text.split("\n");
  let start = 0;
  while (start < lines.length && lines[start].trim() === "") start++;
  if (start >= lines.length || lines[start].trim() !== SUMMARY_HEADER) {
    throw new FormatError(`missing header line "${SUMMARY_HEADER}"`);
  }
  const summary: Summary = new Map();
  for (let i = start + 1; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "end") return { summary, consumedLines: i + 1 };
    if (line === "") continue;
    const space = line.indexOf(" ");
    if (space < 0) throw new FormatError(`line ${i + 1}: expected "key value"`);
    const key = line.slice(0, space);
    summary.set(key, parseNumber(line.slice(space + 1).trim(), `line ${i + 1}`));
  }
  throw new FormatError('summary block has no "end" line');
}

/** Split a slice response into its summary and the gcode that follows. */
export function splitSliceResponse(text: string): { summary: Summary; gcode: string } {
  const { summary, consumedLines } = parseSummary(text);
  const gcode = text.split("\n").slice(consumedLines).join("\n").replace(/^\n+/, "");
  return { summary, gcode };
}

/** Flat numeric key-value machine description (read-only in the viewer). */
export function parseMachine(text: string): Map<string, number> {
  const lines = text.split("\n").map((l) => l.trim()).filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== MACHINE_HEADER) {
    throw new FormatError(`missing header line "${MACHINE_HEADER}"`);
  }
  const values = new Map<string, number>();
  for (let i = 1; i < lines.length; i++) {
    const space = lines[i].indexOf(" ");
    if (space < 0) throw new FormatError(`line ${i + 1}: expected "key value"`);
    values.set(lines[i].slice(0, space), parseNumber(lines[i].slice(space + 1).trim(), `line ${i + 1}`));
  }
  return values;
}

export interface MeshData {
  positions: Float32Array;
  normals: Float32Array;
  indices: Uint32Array;
}

export function parseMesh(text: string): MeshData {
  const lines = text.split("\n").map((l) => l.trim()).filter((l) => l.length > 0);
  if (lines.length === 0 || lines[0] !== MESH_HEADER) {
    throw new FormatError(`missing header line "${MESH_HEADER}"`);
  }
  const positions: number[] = [];
  const normals: number[] = [];
  const indices: number[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(/\s+/);
    const where = `line ${i + 1}`;
    if (parts[0] === "v") {
      if (parts.length !== 7) throw new FormatError(`${where}: v record needs 6 numbers`);
      for (let j = 1; j <= 3; j++) positions.push(parseNumber(parts[j], where));
      for (let j = 4; j <= 6; j++) normals.push(parseNumber(parts[j], where));
    } else if (parts[0] === "f") {
      if (parts.length !== 4) throw new FormatError(`${where}: f record needs 3 indices`);
      for (let j = 1; j <= 3; j++) {
        const idx = parseNumber(parts[j], where);
        if (!Number.isInteger(idx) || idx < 0) {
          throw new FormatError(`${where}: bad vertex index ${parts[j]}`);
        }
        indices.push(idx);
      }
    } else {
      throw new FormatError(`${where}: unknown record ${JSON.stringify(parts[0])}`);
    }
  }
  const vertexCount = positions.length / 3;
  for (const idx of indices) {
    if (idx >= vertexCount) throw new FormatError(`face index ${idx} out of range`);
  }
  return {
    positions: new Float32Array(positions),
    normals: new Float32Array(normals),
    indices: new Uint32Array(indices),
  };
}
