"""Collision simulation and trace export.

Replays a pose stream through forward kinematics: per frame the bed disc and
the substrate mesh are posed by the bed rotation, and the nozzle body (a flat
tip disc widening into a cone) is placed at the commanded position. Clearance
is the smallest signed distance from sampled bed/substrate points to the
nozzle solid; negative means interpenetration. Axis speeds and violations are
carried along so a viewer can show everything about a frame at once.

Geometry notes. The nozzle is rotationally symmetric about the machine Z
axis, so point-to-nozzle distance reduces to 2D: a point at height h above
the tip and horizontal distance rho from its axis is measured against the
meridian outline, whose physical boundary is three straight edges (tip face,
lateral cone wall, top face). The bed disc is sampled on a fixed polar grid;
its clearance is by definition the minimum over that canonical grid. Points
of the substrate within a small ball around the tip are the material being
printed and are excluded, otherwise every legitimate extrusion frame would
read as a near-collision with its own contact point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import MachinePose, PivotGeometry, bed_rotation
from .machine import MachineConfig
from .mesh import SurfaceMesh
from .motion import check_axis_speeds, deltas_between, total_distance

TRACE_HEADER = "open5x-trace v1"
DEFAULT_MARGIN = 0.5

# Canonical bed sampling: radii from center to rim times evenly spaced
# azimuths. Bed clearance is defined as the minimum over this grid.
BED_RADIAL_SAMPLES = 50
BED_ANGULAR_SAMPLES = 200

# Substrate points closer than this many tip radii (3D distance) to the
# nozzle tip are treated as the print contact zone, not an obstacle.
CONTACT_EXCLUSION_FACTOR = 3.0


class SimError(Exception):
    pass


class TraceError(SimError):
    """Trace text is malformed or has an unsupported header."""


@dataclass(frozen=True)
class NozzleModel:
    """Nozzle collision body: flat tip disc of tip_radius at the commanded
    point, widening upward at cone_half_angle for cone_length mm."""

    tip_radius: float
    cone_half_angle: float
    cone_length: float

    @property
    def rim_radius(self) -> float:
        return self.tip_radius + self.cone_length * math.tan(
            math.radians(self.cone_half_angle))

    def signed_distance(self, tip, points) -> np.ndarray:
        """Signed distance from each point to the nozzle solid at `tip`.

        Negative inside. Vectorized over an (N, 3) array.
        """
        rel = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(tip, dtype=float)
        h = rel[:, 2]
        rho = np.hypot(rel[:, 0], rel[:, 1])
        r0, r1, length = self.tip_radius, self.rim_radius, self.cone_length
        edges = (((0.0, 0.0), (r0, 0.0)),
                 ((r0, 0.0), (r1, length)),
                 ((r1, length), (0.0, length)))
        distance = np.full(h.shape, np.inf)
        for (ax, ay), (bx, by) in edges:
            np.minimum(distance, _segment_distance(rho, h, ax, ay, bx, by),
                       out=distance)
        tan_half = math.tan(math.radians(self.cone_half_angle))
        inside = (h >= 0.0) & (h <= length) & (rho <= r0 + h * tan_half)
        return np.where(inside, -distance, distance)


def _segment_distance(px, py, ax, ay, bx, by) -> np.ndarray:
    dx, dy = bx - ax, by - ay
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


def bed_sample_grid(radius: float) -> np.ndarray:
    """Canonical pivot-relative sample points of the resting bed disc."""
    radii = np.linspace(0.0, radius, BED_RADIAL_SAMPLES)
    angles = np.linspace(0.0, 2.0 * math.pi, BED_ANGULAR_SAMPLES, endpoint=False)
    r, a = np.meshgrid(radii, angles)
    return np.column_stack([(r * np.cos(a)).ravel(), (r * np.sin(a)).ravel(),
                            np.zeros(r.size)])


def bed_transform(theta_u: float, theta_v: float,
                  pivot: PivotGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Rigid transform p' = R p + t taking resting bed coordinates to the
    machine frame at bed angles (u, v)."""
    rotation = bed_rotation(theta_u, theta_v, pivot)
    translation = pivot.pivot_point - rotation @ pivot.pivot_point
    return rotation, translation


class CollisionChecker:
    """Clearance queries for one machine setup (bed grid and substrate are
    prepared once; each query poses them and measures against the nozzle)."""

    def __init__(self, config: MachineConfig, mesh: SurfaceMesh | None = None):
        self.nozzle = NozzleModel(config.nozzle_tip_radius,
                                  config.nozzle_cone_half_angle,
                                  config.nozzle_cone_length)
        self.pivot = config.pivot()
        self.bed_points = bed_sample_grid(config.bed_diameter / 2.0)
        self.exclusion = CONTACT_EXCLUSION_FACTOR * config.nozzle_tip_radius
        if mesh is not None and len(mesh.vertices):
            self.substrate_points = mesh.vertices - self.pivot.pivot_point
        else:
            self.substrate_points = None

    def clearances(self, x: float, y: float, z: float,
                   theta_u: float, theta_v: float) -> tuple[float, float]:
        """(bed clearance, substrate clearance) at one pose; the substrate
        value is +inf when no mesh was given or all points sit in the
        contact exclusion zone."""
        rotation, _ = bed_transform(theta_u, theta_v, self.pivot)
        tip = np.array([x, y, z], dtype=float)
        origin = self.pivot.pivot_point
        bed = float(np.min(self.nozzle.signed_distance(
            tip, self.bed_points @ rotation.T + origin)))
        substrate = math.inf
        if self.substrate_points is not None:
            placed = self.substrate_points @ rotation.T + origin
            keep = np.linalg.norm(placed - tip, axis=1) > self.exclusion
            if np.any(keep):
                substrate = float(np.min(self.nozzle.signed_distance(tip, placed[keep])))
        return bed, substrate


@dataclass(frozen=True)
class SimFrame:
    index: int
    time: float                      # seconds from program start
    kind: str                        # travel | extrude | retract | unretract
    pose: MachinePose
    axis_speeds: tuple[float, float, float, float, float, float]
    bed_rotation: tuple[float, ...]  # 9 values, row-major
    bed_translation: tuple[float, float, float]
    min_clearance: float             # inf when there was nothing to measure
    flags: tuple[str, ...]           # sorted
    offending_axis: str | None


@dataclass
class SimTrace:
    frames: list[SimFrame]

    @property
    def total_time(self) -> float:
        return self.frames[-1].time if self.frames else 0.0

    def flagged(self) -> list[SimFrame]:
        return [frame for frame in self.frames if frame.flags]


def _collision_flags(bed: float, substrate: float, margin: float) -> list[str]:
    flags = []
    if bed < 0.0:
        flags.append("collision_bed")
    elif bed < margin:
        flags.append("near_bed")
    if substrate < 0.0:
        flags.append("collision_substrate")
    elif substrate < margin:
        flags.append("near_substrate")
    return flags


def replay(tagged_poses: list[tuple[str, MachinePose]], config: MachineConfig,
           mesh: SurfaceMesh | None = None,
           margin: float = DEFAULT_MARGIN) -> SimTrace:
    """Simulate a pose stream: N segments produce N+1 frames, time 0 first.

    Each segment takes d / F minutes (reported in seconds). Collisions are
    evaluated at every pose and additionally at each segment midpoint, whose
    clearance folds into the arriving frame. Verdicts are data, never errors.
    """
    checker = CollisionChecker(config, mesh)
    limits = config.speed_limits()
    frames: list[SimFrame] = []
    time_s = 0.0
    for i, (kind, pose) in enumerate(tagged_poses):
        has_violation = False
        offending = None
        speeds: tuple[float, ...] = (0.0,) * 6
        bed, substrate = checker.clearances(pose.x, pose.y, pose.z, pose.u, pose.v)
        if i > 0:
            prev = tagged_poses[i - 1][1]
            if pose.f > 0:
                speeds, violations = check_axis_speeds(prev, pose, pose.f, limits)
                time_s += 60.0 * total_distance(deltas_between(prev, pose)) / pose.f
                if violations:
                    has_violation = True
                    offending = max(violations, key=lambda v: v.speed / v.limit).axis
            mid_bed, mid_sub = checker.clearances(
                (prev.x + pose.x) / 2.0, (prev.y + pose.y) / 2.0,
                (prev.z + pose.z) / 2.0, (prev.u + pose.u) / 2.0,
                (prev.v + pose.v) / 2.0)
            bed = min(bed, mid_bed)
            substrate = min(substrate, mid_sub)
        flags = _collision_flags(bed, substrate, margin)
        if has_violation:
            flags.append("axis_violation")
        rotation, translation = bed_transform(pose.u, pose.v, checker.pivot)
        frames.append(SimFrame(
            index=i, time=time_s, kind=kind, pose=pose,
            axis_speeds=tuple(float(s) for s in speeds),
            bed_rotation=tuple(float(c) for c in rotation.ravel()),
            bed_translation=tuple(float(c) for c in translation),
            min_clearance=float(min(bed, substrate)),
            flags=tuple(sorted(flags)),
            offending_axis=offending))
    return SimTrace(frames=frames)


# ---------------------------------------------------------------------------
# Trace serialization

_POSE_KEYS = ("x", "y", "z", "u", "v", "e", "f")
_SPEED_KEYS = ("sx", "sy", "sz", "su", "sv", "se")


def export_trace(trace: SimTrace) -> str:
    """One header line, then one key=value record per frame. Floats use repr
    so a parsed trace reproduces the frames exactly."""
    lines = [TRACE_HEADER]
    for frame in trace.frames:
        parts = [f"index={frame.index}", f"time={frame.time!r}", f"kind={frame.kind}"]
        parts += [f"{key}={getattr(frame.pose, key)!r}" for key in _POSE_KEYS]
        parts += [f"{key}={speed!r}" for key, speed in zip(_SPEED_KEYS, frame.axis_speeds)]
        parts.append("r=" + ",".join(repr(c) for c in frame.bed_rotation))
        parts.append("t=" + ",".join(repr(c) for c in frame.bed_translation))
        parts.append(f"clearance={frame.min_clearance!r}")
        parts.append("flags=" + (",".join(frame.flags) if frame.flags else "-"))
        parts.append(f"axis={frame.offending_axis or '-'}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


_REQUIRED_TRACE_KEYS = (("index", "time", "kind") + _POSE_KEYS + _SPEED_KEYS
                        + ("r", "t", "clearance", "flags", "axis"))


def parse_trace(text: str) -> SimTrace:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != TRACE_HEADER:
        raise TraceError(f"missing header line {TRACE_HEADER!r}")
    frames = []
    for line_no, line in enumerate(lines[1:], start=2):
        fields = {}
        for token in line.split():
            if "=" not in token:
                raise TraceError(f"line {line_no}: expected key=value, got {token!r}")
            key, value = token.split("=", 1)
            fields[key] = value
        missing = [key for key in _REQUIRED_TRACE_KEYS if key not in fields]
        if missing:
            raise TraceError(f"line {line_no}: missing fields {missing}")
        try:
            pose = MachinePose(**{key: float(fields[key]) for key in _POSE_KEYS})
            rotation = tuple(float(c) for c in fields["r"].split(","))
            translation = tuple(float(c) for c in fields["t"].split(","))
            frame = SimFrame(
                index=int(fields["index"]), time=float(fields["time"]),
                kind=fields["kind"], pose=pose,
                axis_speeds=tuple(float(fields[k]) for k in _SPEED_KEYS),
                bed_rotation=rotation, bed_translation=translation,
                min_clearance=float(fields["clearance"]),
                flags=() if fields["flags"] == "-" else tuple(fields["flags"].split(",")),
                offending_axis=None if fields["axis"] == "-" else fields["axis"])
        except ValueError as err:
            raise TraceError(f"line {line_no}: {err}")
        if len(rotation) != 9 or len(translation) != 3:
            raise TraceError(f"line {line_no}: malformed transform")
        frames.append(frame)
    return SimTrace(frames=frames)
