"""Per-segment motion math: extrusion volume, feedrate compensation, rotary
unwrapping, and axis speed checking.

The machine blends all six axes linearly over a segment, so the commanded
feedrate F applies to the joint-space distance d in which one degree of bed
rotation counts like one millimetre. To keep the nozzle moving over the
surface at the requested speed, the emitted feedrate is scaled by d/l where l
is the on-surface segment length. Dimensionally odd, operationally what the
firmware does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import MachinePose

AXES = ("x", "y", "z", "u", "v", "e")


class MotionError(Exception):
    pass


class NonPositiveInput(MotionError):
    """A parameter that must be positive was zero or negative."""


class ZeroLengthSegment(MotionError):
    """Feedrate compensation requested for a segment with no surface length
    but nonzero axis motion; such moves need their own fixed feedrate."""


@dataclass(frozen=True)
class AxisViolation:
    axis: str
    speed: float
    limit: float

    def __str__(self):
        return f"axis {self.axis.upper()} at {self.speed:.3f}/min exceeds limit {self.limit:.3f}/min"


@dataclass(frozen=True)
class SegmentKinematics:
    """Motion bookkeeping for one pose-to-pose segment."""

    index: int
    kind: str                       # extrude | travel | retract | unretract
    deltas: tuple[float, float, float, float, float, float]
    surface_length: float           # l: workpiece-frame length, 0 for non-extrusion
    total_distance: float           # d: six-axis joint-space length
    feedrate: float                 # commanded F (after compensation/clamping)
    axis_speeds: tuple[float, float, float, float, float, float]

    @property
    def duration_min(self) -> float:
        return self.total_distance / self.feedrate if self.feedrate > 0 else 0.0


def deltas_between(pose_from: MachinePose, pose_to: MachinePose) -> np.ndarray:
    a = np.array(pose_from.as_tuple())
    b = np.array(pose_to.as_tuple())
    return b - a


def total_distance(deltas) -> float:
    """d = sqrt(dx^2 + dy^2 + dz^2 + du^2 + dv^2 + de^2), degrees as mm."""
    return float(np.linalg.norm(np.asarray(deltas, dtype=float)))


def compute_extrusion(segment_length: float, nozzle_diameter: float,
                      layer_height: float, filament_diameter: float) -> float:
    """Filament advance for one segment, rectangular-bead volumetric model.

    Bead volume nozzle_diameter * layer_height * segment_length pushed through
    a filament of circular cross-section.
    """
    if nozzle_diameter <= 0 or layer_height <= 0 or filament_diameter <= 0:
        raise NonPositiveInput("nozzle_diameter, layer_height and filament_diameter must be > 0")
    if segment_length < 0:
        raise NonPositiveInput("segment_length must be >= 0")
    area = math.pi * (filament_diameter / 2.0) ** 2
    return nozzle_diameter * layer_height * segment_length / area


def compensate_feedrate(deltas, surface_length: float, feedrate: float) -> float:
    """F' = F * d / l so that surface speed stays at F while all six axes move."""
    if feedrate <= 0:
        raise NonPositiveInput("feedrate must be > 0")
    d = total_distance(deltas)
    if surface_length <= 1e-12:
        if d <= 1e-12:
            return feedrate
        raise ZeroLengthSegment(
            f"segment has no surface length but axis motion d={d!r} mm")
    return feedrate * d / surface_length


def unwrap_rotary(previous_v: float, target_v: float) -> float:
    """Continue the rotary axis to target by the shortest signed arc.

    Returns previous_v + delta with delta in (-180, 180] and the result
    congruent to target_v mod 360. A previous value of 355 with target 1
    yields 361 (+6), never 1 (-354). The antipodal tie breaks positive.
    """
    delta = (target_v - previous_v) % 360.0
    if delta > 180.0:
        delta -= 360.0
    return previous_v + delta


def check_axis_speeds(pose_from: MachinePose, pose_to: MachinePose, feedrate: float,
                      limits: dict[str, float]) -> tuple[tuple[float, ...], list[AxisViolation]]:
    """Per-axis rates for the segment and any that exceed their limits.

    The segment takes t = d / feedrate minutes; axis i then moves at
    |delta_i| / t. The limit boundary is inclusive: exactly at the limit is
    not a violation.
    """
    if feedrate <= 0:
        raise NonPositiveInput("feedrate must be > 0")
    deltas = deltas_between(pose_from, pose_to)
    d = total_distance(deltas)
    if d <= 0.0:
        return (0.0,) * 6, []
    speeds = tuple(float(abs(dv)) * feedrate / d for dv in deltas)
    violations = [AxisViolation(axis, speed, limits[axis])
                  for axis, speed in zip(AXES, speeds)
                  if speed > limits[axis]]
    return speeds, violations


# Relative shave applied when rescaling a feedrate onto the limit boundary,
# so downstream re-checks (including after file quantization) stay strictly
# inside the inclusive limits.
CLAMP_MARGIN = 1e-11


def clamp_feedrate(pose_from: MachinePose, pose_to: MachinePose,
                   limits: dict[str, float]) -> float:
    """Largest feedrate that keeps every axis at or under its limit.

    Scaling F scales all axis speeds uniformly, so the bound is
    min over moving axes of limit_i * d / |delta_i|, shaved by CLAMP_MARGIN.
    """
    deltas = deltas_between(pose_from, pose_to)
    d = total_distance(deltas)
    if d <= 0.0:
        raise ZeroLengthSegment("cannot clamp a zero-motion segment")
    bound = min(limits[axis] * d / float(abs(dv))
                for axis, dv in zip(AXES, deltas) if abs(dv) > 1e-12 * d)
    return bound * (1.0 - CLAMP_MARGIN)
