"""Pose planning: turn a toolpath into an emit-ready machine pose stream.

This stage strings together the per-sample pieces from the other modules:
inverse kinematics with the low-tilt V hold, shortest-arc rotary unwrapping,
extrusion amounts, feedrate compensation, and per-axis speed checks. Poses
are snapped onto the G-code emission grid before any delta is computed, so
the speeds and extrusion the planner reasons about are exactly what the
program file will command.

The machine's position before the first emitted move is unknown (the file
positions absolutely from wherever the head happens to be), so the first
pose anchors the stream and is not itself a checked segment: a program with
N segments carries N + 1 poses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .gcode import E_DECIMALS, emit, quantize_pose
from .kinematics import AngleSolver, MachinePose, rotate_to_machine
from .machine import MachineConfig
from .motion import (
    AXES,
    AxisViolation,
    SegmentKinematics,
    check_axis_speeds,
    clamp_feedrate,
    compensate_feedrate,
    compute_extrusion,
    deltas_between,
    total_distance,
    unwrap_rotary,
)
from .toolpath import Extrude, RetractFilament, SliceParams, Toolpath, Travel, UnretractFilament

SUMMARY_HEADER = "open5x-summary v1"

# Below this much Cartesian motion a travel segment is treated as a pure bed
# rotation and paced by the configured rotary feedrate instead of the travel
# speed (F' = F*d/l is undefined without surface length).
_PURE_ROTATION_EPS = 1e-12


class PipelineError(Exception):
    pass


class SummaryError(PipelineError):
    """Summary text is malformed or has an unsupported header."""


@dataclass(frozen=True)
class RangeViolation:
    """A pose outside the machine's axis travel range."""

    pose_index: int
    axis: str
    value: float
    low: float
    high: float

    def __str__(self):
        return (f"pose {self.pose_index}: axis {self.axis.upper()} at "
                f"{self.value:g} outside [{self.low:g}, {self.high:g}]")


@dataclass
class PlannedProgram:
    """A fully planned pose stream plus everything learned while planning.

    tagged_poses feed gcode.emit directly. segments[i] describes the motion
    from tagged_poses[i] to tagged_poses[i+1]. speed_violations hold what
    still exceeds the configured axis limits (after clamping, when enabled);
    clamped records the violations that clamping resolved.
    """

    tagged_poses: list[tuple[str, MachinePose]] = field(default_factory=list)
    segments: list[SegmentKinematics] = field(default_factory=list)
    speed_violations: list[tuple[int, AxisViolation]] = field(default_factory=list)
    range_violations: list[RangeViolation] = field(default_factory=list)
    clamped: list[tuple[int, AxisViolation]] = field(default_factory=list)
    path_count: int = 0

    def gcode(self) -> str:
        return emit(self.tagged_poses)

    @property
    def total_time_min(self) -> float:
        return sum(s.duration_min for s in self.segments)

    def max_axis_speeds(self) -> dict[str, float]:
        peaks = dict.fromkeys(AXES, 0.0)
        for seg in self.segments:
            for axis, speed in zip(AXES, seg.axis_speeds):
                if speed > peaks[axis]:
                    peaks[axis] = speed
        return peaks

    @property
    def u_max(self) -> float:
        return max((pose.u for _, pose in self.tagged_poses), default=0.0)

    @property
    def clamped_segment_count(self) -> int:
        return len({index for index, _ in self.clamped})

    def summary(self) -> dict[str, float | int]:
        peaks = self.max_axis_speeds()
        out: dict[str, float | int] = {
            "paths": self.path_count,
            "poses": len(self.tagged_poses),
            "segments": len(self.segments),
            "time_min": self.total_time_min,
            "u_max": self.u_max,
        }
        for axis in AXES:
            out[f"max_speed_{axis}"] = peaks[axis]
        out["speed_violations"] = len(self.speed_violations)
        out["range_violations"] = len(self.range_violations)
        out["clamped_segments"] = self.clamped_segment_count
        return out


class _Planner:
    """Mutable state for one plan_program run."""

    def __init__(self, params: SliceParams, config: MachineConfig, clamp_speeds: bool):
        self.params = params
        self.config = config
        self.clamp_speeds = clamp_speeds
        self.pivot = config.pivot()
        self.limits = config.speed_limits()
        self.solver = AngleSolver()
        self.tagged: list[tuple[str, MachinePose]] = []
        self.segments: list[SegmentKinematics] = []
        self.speed_violations: list[tuple[int, AxisViolation]] = []
        self.clamped: list[tuple[int, AxisViolation]] = []
        self.e = 0.0
        # Workpiece-frame position of the last appended pose; surface length
        # is measured between raw sample positions, not quantized machine
        # coordinates, so sub-grid samples still deposit their material.
        self.last_raw: np.ndarray | None = None
        # Filament events arriving before any motion pose exists are held
        # back and flushed right after the stream's anchor pose.
        self.pending: list[tuple[str, float | None]] = []

    def _solve(self, position, normal) -> MachinePose:
        theta_u, theta_v = self.solver.step(normal)
        if self.tagged:
            theta_v = unwrap_rotary(self.tagged[-1][1].v, theta_v)
        x, y, z = rotate_to_machine(position, theta_u, theta_v, self.pivot)
        return MachinePose(x=float(x), y=float(y), z=float(z), u=theta_u, v=theta_v)

    def append_motion(self, kind: str, position, normal, extruding: bool) -> None:
        position = np.asarray(position, dtype=float)
        pose = self._solve(position, normal)
        surface_length = 0.0
        delta_e = 0.0
        if extruding and self.last_raw is not None:
            surface_length = float(np.linalg.norm(position - self.last_raw))
            delta_e = round(compute_extrusion(
                surface_length, self.params.nozzle_diameter,
                self.params.layer_height, self.config.filament_diameter), E_DECIMALS)
        new_e = round(self.e + delta_e, E_DECIMALS)
        quantized = quantize_pose(replace(pose, e=new_e))
        if not self.tagged:
            anchored = replace(quantized, f=self.config.travel_speed)
            self.tagged.append(("travel", anchored))
            self.e = anchored.e
            self.last_raw = position.copy()
            return
        prev = self.tagged[-1][1]
        if quantized.as_tuple() == prev.as_tuple():
            return  # below the file's resolution: nothing to command
        if extruding:
            deltas = deltas_between(prev, quantized)
            feedrate = compensate_feedrate(deltas, surface_length, self.config.print_speed)
        else:
            dx, dy, dz = quantized.x - prev.x, quantized.y - prev.y, quantized.z - prev.z
            if math.sqrt(dx * dx + dy * dy + dz * dz) <= _PURE_ROTATION_EPS:
                feedrate = self.config.rotary_feedrate
            else:
                feedrate = self.config.travel_speed
        self._commit(kind, quantized, feedrate, surface_length)
        self.last_raw = position.copy()

    def append_filament_event(self, kind: str, length: float | None) -> None:
        if not self.tagged:
            self.pending.append((kind, length))
            return
        amount = self.config.retract_length if length is None else length
        signed = amount if kind == "unretract" else -amount
        prev = self.tagged[-1][1]
        new_e = round(self.e + signed, E_DECIMALS)
        quantized = replace(prev, e=new_e)
        if quantized.as_tuple() == prev.as_tuple():
            return  # zero-length retraction
        self._commit(kind, quantized, self.config.retract_speed, 0.0)

    def flush_pending(self) -> None:
        held, self.pending = self.pending, []
        for kind, length in held:
            self.append_filament_event(kind, length)

    def _commit(self, kind: str, pose: MachinePose, feedrate: float,
                surface_length: float) -> None:
        prev = self.tagged[-1][1]
        deltas = tuple(float(d) for d in deltas_between(prev, pose))
        distance = total_distance(deltas)
        speeds, violations = check_axis_speeds(prev, pose, feedrate, self.limits)
        index = len(self.segments)
        if violations and self.clamp_speeds:
            feedrate = clamp_feedrate(prev, pose, self.limits)
            self.clamped.extend((index, v) for v in violations)
            speeds, violations = check_axis_speeds(prev, pose, feedrate, self.limits)
        self.speed_violations.extend((index, v) for v in violations)
        self.segments.append(SegmentKinematics(
            index=index, kind=kind, deltas=deltas, surface_length=surface_length,
            total_distance=distance, feedrate=feedrate, axis_speeds=speeds))
        self.tagged.append((kind, replace(pose, f=feedrate)))
        self.e = pose.e


def plan_program(toolpath: Toolpath, params: SliceParams, config: MachineConfig,
                 clamp_speeds: bool = False) -> PlannedProgram:
    """Plan machine poses for a toolpath.

    Extrude samples become extrusion segments paced so the nozzle keeps the
    configured print speed on the surface. Travels become three positioning
    legs: lift along the departure normal, a chord, and a descent along the
    arrival normal, with the descent endpoint merging into the next path's
    first sample. Retractions become pure filament moves at the retract
    speed. With clamp_speeds, any segment that would exceed an axis speed
    limit has its feedrate reduced until the worst axis sits just under its
    limit; otherwise the violation is only reported.
    """
    planner = _Planner(params, config, clamp_speeds)
    path_count = 0
    for move in toolpath.moves:
        if isinstance(move, Extrude):
            path_count += 1
            first = move.samples[0]
            planner.append_motion("travel", first.position, first.normal, extruding=False)
            planner.flush_pending()
            for sample in move.samples[1:]:
                planner.append_motion("extrude", sample.position, sample.normal,
                                      extruding=True)
        elif isinstance(move, Travel):
            lift_from = move.start.position + move.lift * move.start.normal
            lift_to = move.end.position + move.lift * move.end.normal
            planner.append_motion("travel", lift_from, move.start.normal, extruding=False)
            planner.append_motion("travel", lift_to, move.end.normal, extruding=False)
            planner.append_motion("travel", move.end.position, move.end.normal,
                                  extruding=False)
        elif isinstance(move, RetractFilament):
            planner.append_filament_event("retract", move.length)
        elif isinstance(move, UnretractFilament):
            planner.append_filament_event("unretract", move.length)
        else:
            raise PipelineError(f"unknown move type {type(move).__name__}")
    return PlannedProgram(
        tagged_poses=planner.tagged,
        segments=planner.segments,
        speed_violations=planner.speed_violations,
        range_violations=check_ranges(planner.tagged, config),
        clamped=planner.clamped,
        path_count=path_count,
    )


def check_speeds(tagged_poses: list[tuple[str, MachinePose]],
                 config: MachineConfig) -> tuple[list[SegmentKinematics],
                                                 list[tuple[int, AxisViolation]]]:
    """Re-derive per-segment speeds from a pose stream (e.g. a parsed file).

    Each segment runs at its destination pose's feedrate. Surface length is
    unknown for parsed programs and reported as 0.
    """
    limits = config.speed_limits()
    segments: list[SegmentKinematics] = []
    violations: list[tuple[int, AxisViolation]] = []
    for i in range(1, len(tagged_poses)):
        kind, pose = tagged_poses[i]
        prev = tagged_poses[i - 1][1]
        deltas = tuple(float(d) for d in deltas_between(prev, pose))
        speeds, found = check_axis_speeds(prev, pose, pose.f, limits)
        index = i - 1
        segments.append(SegmentKinematics(
            index=index, kind=kind, deltas=deltas, surface_length=0.0,
            total_distance=total_distance(deltas), feedrate=pose.f,
            axis_speeds=speeds))
        violations.extend((index, v) for v in found)
    return segments, violations


def check_ranges(tagged_poses: list[tuple[str, MachinePose]],
                 config: MachineConfig) -> list[RangeViolation]:
    """Poses outside the configured axis travel. V is a continuous axis and
    is never range-checked."""
    bounds = {
        "x": (config.x_min, config.x_max),
        "y": (config.y_min, config.y_max),
        "z": (config.z_min, config.z_max),
        "u": (config.u_min, config.u_max),
    }
    violations = []
    for i, (_, pose) in enumerate(tagged_poses):
        for axis, (low, high) in bounds.items():
            value = getattr(pose, axis)
            if value < low - 1e-9 or value > high + 1e-9:
                violations.append(RangeViolation(
                    pose_index=i, axis=axis, value=value, low=low, high=high))
    return violations


# ---------------------------------------------------------------------------
# Summary block format

_SUMMARY_INT_KEYS = frozenset({
    "paths", "poses", "segments", "speed_violations", "range_violations",
    "clamped_segments",
})


def render_summary(program: PlannedProgram) -> str:
    """Serialize the planning summary as a key-value block ending in 'end'."""
    lines = [SUMMARY_HEADER]
    for key, value in program.summary().items():
        lines.append(f"{key} {value!r}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_summary(text: str) -> dict[str, float | int]:
    """Read a summary block back into a dict (ints for counts)."""
    lines = [ln.strip() for ln in text.splitlines()]
    content = [ln for ln in lines if ln and not ln.startswith("#")]
    if not content or content[0] != SUMMARY_HEADER:
        raise SummaryError(f"missing header line {SUMMARY_HEADER!r}")
    out: dict[str, float | int] = {}
    for line in content[1:]:
        if line == "end":
            return out
        parts = line.split()
        if len(parts) != 2:
            raise SummaryError(f"expected 'key value', got {line!r}")
        key, raw = parts
        try:
            out[key] = int(raw) if key in _SUMMARY_INT_KEYS else float(raw)
        except ValueError:
            raise SummaryError(f"value for {key!r} is not a number: {raw!r}")
    raise SummaryError("summary block is missing its 'end' line")
