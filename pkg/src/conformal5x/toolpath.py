"""Conformal toolpath generation.

Planar perimeter and hatch patterns are built with shapely inside the
requested region, sampled at a fixed segment length, draped vertically onto
the substrate mesh, then pushed out along the interpolated surface normals by
the layer offset. Travels between paths lift along the endpoint normals.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from shapely import affinity
from shapely.geometry import LineString, Polygon
from shapely.geometry.polygon import orient

from .mesh import SurfaceMesh, offset_point

log = logging.getLogger(__name__)

PARAMS_HEADER = "open5x-params v1"
DEFAULT_SEGMENT_LENGTH = 0.2


class ToolpathError(Exception):
    pass


class ParamsError(ToolpathError):
    """Parameter file is syntactically invalid or has unknown keys."""


class RegionOffSurface(ToolpathError):
    """A planar sample inside the region fails to project onto the mesh."""


@dataclass(frozen=True)
class SliceParams:
    nozzle_diameter: float = 0.4
    layer_height: float = 0.2
    layer_count: int = 1
    travel_height: float = 2.0
    infill_angle: float = 0.0
    infill_spacing: float = 1.0
    perimeter_count: int = 1
    segment_length: float = DEFAULT_SEGMENT_LENGTH
    region: tuple[tuple[float, float], ...] = (
        (-5.0, -5.0), (5.0, -5.0), (5.0, 5.0), (-5.0, 5.0))

    def validate(self) -> list[tuple[str, str]]:
        """Field-level problems, empty when the parameters are usable."""
        problems = []
        if self.nozzle_diameter <= 0:
            problems.append(("nozzle_diameter", "must be > 0"))
        if self.layer_height <= 0:
            problems.append(("layer_height", "must be > 0"))
        if self.layer_count < 1 or int(self.layer_count) != self.layer_count:
            problems.append(("layer_count", "must be an integer >= 1"))
        if self.travel_height < 0:
            problems.append(("travel_height", "must be >= 0"))
        if self.infill_spacing <= 0:
            problems.append(("infill_spacing", "must be > 0"))
        elif self.nozzle_diameter > 0 and self.infill_spacing < self.nozzle_diameter:
            problems.append(("infill_spacing", "must be >= nozzle_diameter"))
        if self.perimeter_count < 0 or int(self.perimeter_count) != self.perimeter_count:
            problems.append(("perimeter_count", "must be an integer >= 0"))
        if self.segment_length <= 0:
            problems.append(("segment_length", "must be > 0"))
        if len(self.region) < 3:
            problems.append(("region", "needs at least 3 vertices"))
        else:
            poly = Polygon(self.region)
            if not (poly.is_valid and poly.is_simple) or poly.area <= 0:
                problems.append(("region", "must be a simple polygon with positive area"))
        return problems


@dataclass(frozen=True)
class PathSample:
    """One toolpath sample: a point in workpiece space and the unit surface
    normal it was offset along."""

    position: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class Extrude:
    samples: tuple[PathSample, ...]
    layer: int = 0
    role: str = "infill"   # or "perimeter"

    @property
    def start(self) -> PathSample:
        return self.samples[0]

    @property
    def end(self) -> PathSample:
        return self.samples[-1]


@dataclass(frozen=True)
class Travel:
    start: PathSample
    end: PathSample
    lift: float


@dataclass(frozen=True)
class RetractFilament:
    length: float | None = None    # machine default when None


@dataclass(frozen=True)
class UnretractFilament:
    length: float | None = None


Move = Extrude | Travel | RetractFilament | UnretractFilament


@dataclass(frozen=True)
class Toolpath:
    moves: tuple[Move, ...]

    def extrudes(self) -> list[Extrude]:
        return [m for m in self.moves if isinstance(m, Extrude)]


# ---------------------------------------------------------------------------
# Planar pattern construction

def _sample_polyline(points: list[np.ndarray], segment_length: float,
                     closed: bool = False) -> list[np.ndarray]:
    """Points along a 2D polyline spaced at most segment_length apart,
    keeping every original vertex. A closed polyline repeats its first point
    exactly at the end."""
    out = []
    pairs = list(zip(points[:-1], points[1:]))
    for a, b in pairs:
        length = float(np.hypot(*(b - a)))
        if length <= 1e-12:
            continue
        n = max(1, math.ceil(length / segment_length - 1e-12))
        for i in range(n):
            out.append(a + (i / n) * (b - a))
    if closed:
        out.append(points[0].copy())
    else:
        out.append(points[-1].copy())
    return out


def _rotate_points(pts: np.ndarray, degrees: float, origin: np.ndarray) -> np.ndarray:
    t = math.radians(degrees)
    c, s = math.cos(t), math.sin(t)
    r = np.array([[c, -s], [s, c]])
    return (pts - origin) @ r.T + origin


def _hatch_segments(region: Polygon, spacing: float, angle: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """Serpentine hatch of the region: parallel lines at `angle` degrees,
    spaced `spacing`, direction alternating per line. Returns ordered planar
    endpoint pairs already oriented for serpentine traversal."""
    origin = np.array([region.centroid.x, region.centroid.y])
    rotated = affinity.rotate(region, -angle, origin=tuple(origin))
    minx, miny, maxx, maxy = rotated.bounds
    n_levels = int(math.floor((maxy - miny) / spacing + 1e-9)) + 1
    segments = []
    for k in range(n_levels):
        y = miny + k * spacing
        scan = LineString([(minx - 1.0, y), (maxx + 1.0, y)])
        inter = rotated.intersection(scan)
        pieces = []
        for geom in getattr(inter, "geoms", [inter]):
            if geom.geom_type != "LineString" or geom.length <= 1e-9:
                continue
            xs = [p[0] for p in geom.coords]
            pieces.append((min(xs), max(xs)))
        pieces.sort()
        if k % 2 == 1:
            pieces = [(b, a) for a, b in reversed(pieces)]
        for x0, x1 in pieces:
            pair = np.array([[x0, y], [x1, y]])
            pair = _rotate_points(pair, angle, origin)
            segments.append((pair[0], pair[1]))
    return segments


def _inset_rings(region: Polygon, distances: list[float]) -> list[list[np.ndarray] | None]:
    """Planar inset outline(s) per distance; None marks a vanished inset.
    Rings come out counter-clockwise, starting at the lexicographically
    smallest vertex, closed (first vertex not repeated)."""
    results = []
    for d in distances:
        inset = region.buffer(-d, join_style=2)
        if inset.is_empty or inset.area <= 1e-12:
            results.append(None)
            continue
        polys = sorted(getattr(inset, "geoms", [inset]), key=lambda p: (p.bounds[0], p.bounds[1]))
        rings = []
        for poly in polys:
            ring = orient(Polygon(poly.exterior), 1.0).exterior.coords[:-1]
            pts = [np.array(p) for p in ring]
            start = min(range(len(pts)), key=lambda i: (pts[i][0], pts[i][1]))
            rings.append(pts[start:] + pts[:start])
        results.append(rings)
    return results


# ---------------------------------------------------------------------------
# Draping onto the mesh

def _drape_point(mesh: SurfaceMesh, pt2d: np.ndarray, offset: float) -> PathSample:
    sp = mesh.project_down(pt2d)
    if sp is None:
        raise RegionOffSurface(
            f"planar sample ({pt2d[0]:.4f}, {pt2d[1]:.4f}) does not project onto the substrate")
    return PathSample(position=offset_point(sp, offset), normal=sp.normal)


def _refine(mesh: SurfaceMesh, a2d, a: PathSample, b2d, b: PathSample,
            offset: float, segment_length: float, depth: int = 0) -> list[tuple[np.ndarray, PathSample]]:
    """Samples after a (exclusive) up to b (inclusive) with 3D gaps at most
    segment_length, bisecting in the planar parameter."""
    gap = float(np.linalg.norm(b.position - a.position))
    if gap <= segment_length + 1e-9 or depth >= 24:
        if depth >= 24:
            log.warning("segment refinement depth cap hit near (%.3f, %.3f)", *b2d)
        return [(b2d, b)]
    mid2d = (a2d + b2d) / 2.0
    mid = _drape_point(mesh, mid2d, offset)
    return (_refine(mesh, a2d, a, mid2d, mid, offset, segment_length, depth + 1)
            + _refine(mesh, mid2d, mid, b2d, b, offset, segment_length, depth + 1))


def _drape_polyline(mesh: SurfaceMesh, pts2d: list[np.ndarray], offset: float,
                    segment_length: float) -> list[PathSample]:
    first = _drape_point(mesh, pts2d[0], offset)
    out2d = [(pts2d[0], first)]
    for nxt2d in pts2d[1:]:
        prev2d, prev = out2d[-1]
        nxt = _drape_point(mesh, nxt2d, offset)
        out2d.extend(_refine(mesh, prev2d, prev, nxt2d, nxt, offset, segment_length))
    return [s for _, s in out2d]


def _layer_offset(params: SliceParams, layer_index: int) -> float:
    return (layer_index + 0.5) * params.layer_height


# ---------------------------------------------------------------------------
# Public generation operations

def generate_infill(mesh: SurfaceMesh, params: SliceParams, layer_index: int) -> list[Extrude]:
    """Serpentine hatch lines draped onto the substrate for one layer.

    The hatch angle advances 90 degrees per layer (cross-hatching). Each line
    is sampled at the segment length in the plane, projected, offset along
    the interpolated normals, and refined until 3D spacing also respects the
    segment length.
    """
    region = Polygon(params.region)
    angle = params.infill_angle + 90.0 * layer_index
    offset = _layer_offset(params, layer_index)
    paths = []
    for a, b in _hatch_segments(region, params.infill_spacing, angle):
        pts = _sample_polyline([a, b], params.segment_length)
        samples = _drape_polyline(mesh, pts, offset, params.segment_length)
        if len(samples) >= 2:
            paths.append(Extrude(samples=tuple(samples), layer=layer_index, role="infill"))
    return paths


def generate_perimeters(mesh: SurfaceMesh, params: SliceParams, layer_index: int) -> list[Extrude]:
    """Closed inset outlines draped onto the substrate for one layer.

    Perimeter i is inset (i + 0.5) nozzle diameters from the region edge.
    Insets that vanish are skipped with a warning; remaining ones are
    returned outermost first.
    """
    if params.perimeter_count <= 0:
        return []
    region = Polygon(params.region)
    offset = _layer_offset(params, layer_index)
    distances = [(i + 0.5) * params.nozzle_diameter for i in range(params.perimeter_count)]
    paths = []
    for i, rings in enumerate(_inset_rings(region, distances)):
        if rings is None:
            log.warning("perimeter %d inset collapsed; emitting %d of %d perimeters",
                        i, len(paths), params.perimeter_count)
            break
        for ring in rings:
            pts = _sample_polyline(ring + [ring[0]], params.segment_length, closed=False)
            samples = _drape_polyline(mesh, pts, offset, params.segment_length)
            paths.append(Extrude(samples=tuple(samples), layer=layer_index, role="perimeter"))
    return paths


def plan_travels(paths: list[Extrude], params: SliceParams) -> Toolpath:
    """Order paths and join them with retract/travel/unretract sequences.

    Ordering is greedy nearest-start within each (layer, role) group,
    perimeters before infill, layers bottom-up; ties fall back to generation
    order. Travels lift by travel_height along the endpoint normals.
    """
    if not paths:
        raise ToolpathError("no paths to plan")
    ordered = _greedy_order(paths)
    moves: list[Move] = [UnretractFilament()]
    for i, path in enumerate(ordered):
        moves.append(path)
        if i + 1 < len(ordered):
            nxt = ordered[i + 1]
            moves.append(RetractFilament())
            moves.append(Travel(start=path.end, end=nxt.start, lift=params.travel_height))
            moves.append(UnretractFilament())
    moves.append(RetractFilament())
    return Toolpath(moves=tuple(moves))


def _greedy_order(paths: list[Extrude]) -> list[Extrude]:
    groups: dict[tuple[int, int], list[tuple[int, Extrude]]] = {}
    for idx, p in enumerate(paths):
        key = (p.layer, 0 if p.role == "perimeter" else 1)
        groups.setdefault(key, []).append((idx, p))
    ordered = []
    current: np.ndarray | None = None
    for key in sorted(groups):
        pool = groups[key]
        while pool:
            if current is None:
                choice = 0
            else:
                choice = min(range(len(pool)), key=lambda j: (
                    float(np.linalg.norm(pool[j][1].start.position - current)), pool[j][0]))
            _, path = pool.pop(choice)
            ordered.append(path)
            current = path.end.position
    return ordered


def slice_mesh(mesh: SurfaceMesh, params: SliceParams) -> Toolpath:
    """Full conformal slicing: perimeters then infill per layer, layers
    bottom-up, joined with travels."""
    problems = params.validate()
    if problems:
        detail = "; ".join(f"{k}: {m}" for k, m in problems)
        raise ParamsError(f"invalid slicing parameters: {detail}")
    paths = []
    for layer in range(int(params.layer_count)):
        paths.extend(generate_perimeters(mesh, params, layer))
        paths.extend(generate_infill(mesh, params, layer))
    return plan_travels(paths, params)


def travel_clearances(toolpath: Toolpath, mesh: SurfaceMesh,
                      step: float = 0.1) -> list[tuple[int, float]]:
    """Worst vertical clearance of each travel's three legs over the mesh.

    Legs are sampled at `step` mm; each sample's height above the projected
    surface point at its xy is measured. Samples off the mesh footprint are
    unconstrained. Negative values mean the straight legs dip under the
    substrate (advisory; the collision checker owns hard verdicts).
    """
    results = []
    for idx, move in enumerate(toolpath.moves):
        if not isinstance(move, Travel):
            continue
        a = move.start.position
        b = move.end.position
        a_up = a + move.lift * move.start.normal
        b_up = b + move.lift * move.end.normal
        worst = math.inf
        for leg_from, leg_to in ((a, a_up), (a_up, b_up), (b_up, b)):
            length = float(np.linalg.norm(leg_to - leg_from))
            n = max(1, math.ceil(length / step))
            for t in np.linspace(0.0, 1.0, n + 1):
                p = leg_from + t * (leg_to - leg_from)
                sp = mesh.project_down(p[:2])
                if sp is not None:
                    worst = min(worst, float(p[2] - sp.position[2]))
        results.append((idx, worst))
    return results


def check_invariants(toolpath: Toolpath, segment_length: float) -> None:
    """Assert the structural toolpath contract; used by tests and debugging.

    Checks sample spacing, unit normals, and that extrusion is always bracketed
    by unretract before and retract after, with balanced alternation.
    """
    depth = 0
    for move in toolpath.moves:
        if isinstance(move, UnretractFilament):
            assert depth == 0, "unretract while already primed"
            depth = 1
        elif isinstance(move, RetractFilament):
            assert depth == 1, "retract while already retracted"
            depth = 0
        elif isinstance(move, Extrude):
            assert depth == 1, "extrude while retracted"
            assert len(move.samples) >= 1
            for s in move.samples:
                assert abs(np.linalg.norm(s.normal) - 1.0) < 1e-9
            for a, b in zip(move.samples[:-1], move.samples[1:]):
                gap = float(np.linalg.norm(b.position - a.position))
                assert gap <= segment_length + 1e-9, f"sample gap {gap} > {segment_length}"
        elif isinstance(move, Travel):
            assert depth == 0, "travel while primed"
    assert depth == 0, "toolpath ends primed"


# ---------------------------------------------------------------------------
# Parameter file format

_PARAM_FIELDS = {
    "nozzle_diameter": float,
    "layer_height": float,
    "layer_count": int,
    "travel_height": float,
    "infill_angle": float,
    "infill_spacing": float,
    "perimeter_count": int,
    "segment_length": float,
}


def parse_params(text: str) -> SliceParams:
    """Parse the flat key-value parameter file.

    The region key takes space-separated x,y pairs; all other keys take one
    number. Unknown keys are errors. Missing keys keep their defaults.
    """
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    content = [(n, ln) for n, ln in lines if ln and not ln.startswith("#")]
    if not content or content[0][1] != PARAMS_HEADER:
        raise ParamsError(f"missing header line {PARAMS_HEADER!r}")
    kwargs: dict = {}
    for line_no, line in content[1:]:
        parts = line.split()
        key = parts[0]
        if key in kwargs:
            raise ParamsError(f"line {line_no}: duplicate key {key!r}")
        if key == "region":
            try:
                pts = tuple(tuple(float(c) for c in p.split(",")) for p in parts[1:])
            except ValueError:
                raise ParamsError(f"line {line_no}: region points must be x,y pairs")
            if any(len(p) != 2 for p in pts) or len(pts) < 3:
                raise ParamsError(f"line {line_no}: region needs at least 3 x,y pairs")
            kwargs["region"] = pts
        elif key in _PARAM_FIELDS:
            if len(parts) != 2:
                raise ParamsError(f"line {line_no}: expected '{key} value'")
            try:
                value = float(parts[1])
            except ValueError:
                raise ParamsError(f"line {line_no}: value for {key!r} is not a number")
            if _PARAM_FIELDS[key] is int:
                if value != int(value):
                    raise ParamsError(f"line {line_no}: {key!r} must be an integer")
                value = int(value)
            kwargs[key] = value
        else:
            raise ParamsError(f"line {line_no}: unknown parameter {key!r}")
    return SliceParams(**kwargs)


def render_params(params: SliceParams) -> str:
    lines = [PARAMS_HEADER]
    for key in _PARAM_FIELDS:
        lines.append(f"{key} {getattr(params, key)!r}")
    lines.append("region " + " ".join(f"{x!r},{y!r}" for x, y in params.region))
    return "\n".join(lines) + "\n"


def with_region(params: SliceParams, region) -> SliceParams:
    return replace(params, region=tuple(tuple(p) for p in region))
