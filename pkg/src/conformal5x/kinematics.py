"""Inverse kinematics for a tilting/rotating-bed 5-axis machine.

Axis model: a Cartesian XYZ gantry over a bed that tilts by U about the
machine Y axis and rotates by V about the bed's own (tilted) vertical. The
solver turns a surface sample (point + unit normal) into bed angles that
present the surface horizontally under the nozzle, plus the machine-frame
position of the contact point after the bed has moved.

Sign conventions are chosen so that the composite bed rotation maps the
sample normal onto machine +Z; that alignment property is the contract all
angle math here is tested against. Angles are carried in degrees throughout
and converted to radians only inside trig calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Below this tilt, the bed rotation angle is geometrically indeterminate;
# path solving holds the previous V value instead of trusting atan2 noise.
V_HOLD_TILT_DEG = 0.01


class KinematicsError(Exception):
    pass


class NonUnitNormal(KinematicsError):
    """Surface normal length deviates from 1 by more than 1e-9."""


@dataclass(frozen=True)
class MachinePose:
    """One machine state. x/y/z in mm, u/v in degrees, e in mm of filament
    (cumulative), f in mm/min. v is unwrapped: any real value, multiples of
    360 apart from its principal angle."""

    x: float
    y: float
    z: float
    u: float
    v: float
    e: float = 0.0
    f: float = 0.0

    def xyz(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.x, self.y, self.z, self.u, self.v, self.e)


@dataclass(frozen=True)
class PivotGeometry:
    """Where the bed's two rotation axes intersect, in machine coordinates.

    u_axis_direction is the tilt axis at U=0. The angle solver assumes the
    machine Y axis (the default); it is stored for forward transforms only.
    """

    pivot_point: np.ndarray = field(default_factory=lambda: np.zeros(3))
    u_axis_direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "pivot_point", np.asarray(self.pivot_point, dtype=float))
        object.__setattr__(self, "u_axis_direction",
                           np.asarray(self.u_axis_direction, dtype=float))
        if abs(np.linalg.norm(self.u_axis_direction) - 1.0) > 1e-9:
            raise KinematicsError("u_axis_direction must be a unit vector")


def _axis_rotation(axis: np.ndarray, degrees: float) -> np.ndarray:
    """Right-handed rotation matrix about an arbitrary unit axis (Rodrigues)."""
    t = math.radians(degrees)
    c, s = math.cos(t), math.sin(t)
    ux, uy, uz = axis
    cross = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(axis, axis)


def solve_angles(normal) -> tuple[float, float]:
    """Bed angles (u, v) in degrees for a unit surface normal (I, J, K).

    u is the angle between the normal and vertical, in [0, 180]; v is
    atan2(J, I) in (-180, 180]. The tilt is evaluated as
    atan2(hypot(I, J), K) rather than arccos(K): the two agree for unit
    vectors, but arccos loses up to ~1e-8 rad next to the poles where the
    dot product rounds to +/-1, which would break downstream alignment.
    For a vertical normal v is indeterminate and the conventional
    atan2(0, 0) = 0 is kept.
    """
    n = np.asarray(normal, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise NonUnitNormal(f"normal {n.tolist()} has length {np.linalg.norm(n)!r}")
    theta_u = math.degrees(math.atan2(math.hypot(n[0], n[1]), n[2]))
    theta_v = math.degrees(math.atan2(n[1], n[0]))
    if theta_v <= -180.0:
        theta_v += 360.0
    return theta_u, theta_v


def bed_rotation(theta_u: float, theta_v: float, pivot: PivotGeometry | None = None) -> np.ndarray:
    """Rotation applied to bed-fixed coordinates at tilt u, rotation v.

    Equals a rotation by -v about the bed's current vertical composed with a
    tilt by -u about the u axis; for the normal solved by solve_angles the
    product maps that normal onto machine +Z.
    """
    u_axis = pivot.u_axis_direction if pivot is not None else np.array([0.0, 1.0, 0.0])
    rz = _axis_rotation(np.array([0.0, 0.0, 1.0]), -theta_v)
    ru = _axis_rotation(u_axis, -theta_u)
    return ru @ rz


def tilted_v_axis(theta_u: float, pivot: PivotGeometry | None = None) -> np.ndarray:
    """Direction of the bed's rotation axis after tilting by u."""
    u_axis = pivot.u_axis_direction if pivot is not None else np.array([0.0, 1.0, 0.0])
    return _axis_rotation(u_axis, -theta_u) @ np.array([0.0, 0.0, 1.0])


def rotate_to_machine(p, theta_u: float, theta_v: float, pivot: PivotGeometry) -> np.ndarray:
    """Machine-frame position of bed-fixed point p at bed angles (u, v).

    Rigid rotation about the pivot: translate to the pivot, rotate, translate
    back. Distances to the pivot are preserved.
    """
    p = np.asarray(p, dtype=float)
    r = bed_rotation(theta_u, theta_v, pivot)
    return pivot.pivot_point + r @ (p - pivot.pivot_point)


def machine_to_workpiece(p_machine, theta_u: float, theta_v: float,
                         pivot: PivotGeometry) -> np.ndarray:
    """Inverse of rotate_to_machine at the same angles."""
    p_machine = np.asarray(p_machine, dtype=float)
    r = bed_rotation(theta_u, theta_v, pivot)
    return pivot.pivot_point + r.T @ (p_machine - pivot.pivot_point)


def solve_pose(position, normal, pivot: PivotGeometry) -> MachinePose:
    """Full inverse-kinematics step for one sample.

    Solves bed angles from the normal, then reports where the sample point
    sits in machine coordinates once the bed has rotated there. The nozzle
    must be sent to that (x, y, z) with the bed at (u, v).
    """
    theta_u, theta_v = solve_angles(normal)
    x, y, z = rotate_to_machine(position, theta_u, theta_v, pivot)
    return MachinePose(x=float(x), y=float(y), z=float(z), u=theta_u, v=theta_v)


class AngleSolver:
    """Per-path angle solving with the low-tilt V hold.

    Below V_HOLD_TILT_DEG of tilt the bed orientation barely matters but
    atan2 output can swing arbitrarily; holding the previous V avoids
    commanding fast spurious bed spins across near-flat patches. The first
    sample of a stream takes its solved value as-is.
    """

    def __init__(self, hold_threshold: float = V_HOLD_TILT_DEG):
        self.hold_threshold = hold_threshold
        self._last_v: float | None = None

    def step(self, normal) -> tuple[float, float]:
        theta_u, theta_v = solve_angles(normal)
        if theta_u < self.hold_threshold and self._last_v is not None:
            theta_v = self._last_v
        self._last_v = theta_v
        return theta_u, theta_v


def solve_path(samples, pivot: PivotGeometry,
               hold_threshold: float = V_HOLD_TILT_DEG) -> list[MachinePose]:
    """Solve a sequence of (position, normal) samples with the V hold.

    Returned v values are principal angles (or held copies); shortest-path
    unwrapping across consecutive poses is a separate downstream step.
    """
    solver = AngleSolver(hold_threshold)
    poses = []
    for position, normal in samples:
        theta_u, theta_v = solver.step(normal)
        x, y, z = rotate_to_machine(position, theta_u, theta_v, pivot)
        poses.append(MachinePose(x=float(x), y=float(y), z=float(z), u=theta_u, v=theta_v))
    return poses
