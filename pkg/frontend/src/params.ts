/**
 * Slicing parameter model for the what-if form. The validation rules here
 * deliberately mirror what the service enforces, so a form submission that
 * passes locally is expected to be accepted (geometry permitting) and bad
 * values are caught without a network round trip.
 */

import { FormatError, PARAMS_HEADER } from "./formats.js";

export type Vec2 = [number, number];

export interface SliceParams {
  nozzle_diameter: number;
  layer_height: number;
  layer_count: number;
  travel_height: number;
  infill_angle: number;
  infill_spacing: number;
  perimeter_count: number;
  segment_length: number;
  region: Vec2[];
}

export const DEFAULT_PARAMS: SliceParams = {
  nozzle_diameter: 0.4,
  layer_height: 0.2,
  layer_count: 1,
  travel_height: 2.0,
  infill_angle: 0.0,
  infill_spacing: 1.0,
  perimeter_count: 1,
  segment_length: 0.2,
  region: [
    [-5, -5],
    [5, -5],
    [5, 5],
    [-5, 5],
  ],
};

export const NUMERIC_FIELDS = [
  "nozzle_diameter",
  "layer_height",
  "layer_count",
  "travel_height",
  "infill_angle",
  "infill_spacing",
  "perimeter_count",
  "segment_length",
] as const;

export type NumericField = (typeof NUMERIC_FIELDS)[number];

export interface FieldProblem {
  field: string;
  message: string;
}

function shoelaceArea(points: Vec2[]): number {
  let twice = 0;
  for (let i = 0; i < points.length; i++) {
    const [x1, y1] = points[i];
    const [x2, y2] = points[(i + 1) % points.length];
    twice += x1 * y2 - x2 * y1;
  }
  return Math.abs(twice) / 2;
}

function orient(a: Vec2, b: Vec2, c: Vec2): number {
  return Math.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

function segmentsCross(a: Vec2, b: Vec2, c: Vec2, d: Vec2): boolean {
  const o1 = orient(a, b, c);
  const o2 = orient(a, b, d);
  const o3 = orient(c, d, a);
  const o4 = orient(c, d, b);
  return o1 !== o2 && o3 !== o4 && o1 !== 0 && o2 !== 0 && o3 !== 0 && o4 !== 0;
}

/** True when no two non-adjacent polygon edges cross each other. */
function isSimplePolygon(points: Vec2[]): boolean {
  const n = points.length;
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      const adjacent = j === i + 1 || (i === 0 && j === n - 1);
      if (adjacent) continue;
      if (
        segmentsCross(points[i], points[(i + 1) % n], points[j], points[(j + 1) % n])
      ) {
        return false;
      }
    }
  }
  return true;
}

export function validateParams(p: SliceParams): FieldProblem[] {
  const problems: FieldProblem[] = [];
  const bad = (field: string, message: string) => problems.push({ field, message });
  for (const field of NUMERIC_FIELDS) {
    if (!Number.isFinite(p[field])) bad(field, "must be a number");
  }
  if (p.nozzle_diameter <= 0) bad("nozzle_diameter", "must be > 0");
  if (p.layer_height <= 0) bad("layer_height", "must be > 0");
  if (p.layer_count < 1 || !Number.isInteger(p.layer_count)) {
    bad("layer_count", "must be an integer >= 1");
  }
  if (p.travel_height < 0) bad("travel_height", "must be >= 0");
  if (p.infill_spacing <= 0) {
    bad("infill_spacing", "must be > 0");
  } else if (p.nozzle_diameter > 0 && p.infill_spacing < p.nozzle_diameter) {
    bad("infill_spacing", "must be >= nozzle_diameter");
  }
  if (p.perimeter_count < 0 || !Number.isInteger(p.perimeter_count)) {
    bad("perimeter_count", "must be an integer >= 0");
  }
  if (p.segment_length <= 0) bad("segment_length", "must be > 0");
  if (p.region.length < 3) {
    bad("region", "needs at least 3 vertices");
  } else if (p.region.some(([x, y]) => !Number.isFinite(x) || !Number.isFinite(y))) {
    bad("region", "vertices must be finite numbers");
  } else if (!isSimplePolygon(p.region) || shoelaceArea(p.region) <= 0) {
    bad("region", "must be a simple polygon with positive area");
  }
  return problems;
}

/** Serialize to the flat key-value request body the service accepts. */
export function renderParams(p: SliceParams): string {
  const lines = [PARAMS_HEADER];
  for (const field of NUMERIC_FIELDS) {
    lines.push(`${field} ${p[field]}`);
  }
  lines.push("region " + p.region.map(([x, y]) => `${x},${y}`).join(" "));
  return lines.join("\n") + "\n";
}

export function parseParams(text: string): SliceParams {
  const lines = text
    .split("\n")
    .map((l, i) => [i + 1, l.trim()] as const)
    .filter(([, l]) => l.length > 0 && !l.startsWith("#"));
  if (lines.length === 0 || lines[0][1] !== PARAMS_HEADER) {
    throw new FormatError(`missing header line "${PARAMS_HEADER}"`);
  }
  const result: SliceParams = { ...DEFAULT_PARAMS, region: [...DEFAULT_PARAMS.region] };
  const seen = new Set<string>();
  for (const [lineNo, line] of lines.slice(1)) {
    const parts = line.split(/\s+/);
    const key = parts[0];
    if (seen.has(key)) throw new FormatError(`line ${lineNo}: duplicate key "${key}"`);
    seen.add(key);
    if (key === "region") {
      const points: Vec2[] = [];
      for (const pair of parts.slice(1)) {
        const coords = pair.split(",").map(Number);
        if (coords.length !== 2 || coords.some(Number.isNaN)) {
          throw new FormatError(`line ${lineNo}: region points must be x,y pairs`);
        }
        points.push([coords[0], coords[1]]);
      }
      if (points.length < 3) {
        throw new FormatError(`line ${lineNo}: region needs at least 3 x,y pairs`);
      }
      result.region = points;
    } else if ((NUMERIC_FIELDS as readonly string[]).includes(key)) {
      if (parts.length !== 2) throw new FormatError(`line ${lineNo}: expected "${key} value"`);
      const value = Number(parts[1]);
      if (Number.isNaN(value)) {
        throw new FormatError(`line ${lineNo}: value for "${key}" is not a number`);
      }
      result[key as NumericField] = value;
    } else {
      throw new FormatError(`line ${lineNo}: unknown parameter "${key}"`);
    }
  }
  return result;
}
