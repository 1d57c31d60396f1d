"""Machine description: axis travel ranges, speed limits, pivot and nozzle
geometry, filament, and process speeds. Stored as a flat key-value text file
with a version header; unknown keys are rejected so typos fail loudly."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .kinematics import PivotGeometry

MACHINE_HEADER = "open5x-machine v1"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class MachineConfig:
    # Axis travel (mm for xyz, degrees for the tilt).
    x_min: float = -150.0
    x_max: float = 150.0
    y_min: float = -150.0
    y_max: float = 150.0
    z_min: float = 0.0
    z_max: float = 300.0
    u_min: float = 0.0
    u_max: float = 90.0
    # Per-axis speed ceilings (mm/min; deg/min for u and v).
    max_speed_x: float = 12000.0
    max_speed_y: float = 12000.0
    max_speed_z: float = 6000.0
    max_speed_u: float = 3600.0
    max_speed_v: float = 7200.0
    max_speed_e: float = 3000.0
    # Intersection of the tilt and rotation axes, machine frame.
    pivot_x: float = 0.0
    pivot_y: float = 0.0
    pivot_z: float = 0.0
    bed_diameter: float = 160.0
    # Nozzle collision body: flat tip disc rising as a widening cone.
    nozzle_tip_radius: float = 0.5
    nozzle_cone_half_angle: float = 25.0
    nozzle_cone_length: float = 15.0
    filament_diameter: float = 1.75
    retract_length: float = 1.0
    retract_speed: float = 1800.0
    print_speed: float = 1200.0
    travel_speed: float = 3000.0
    # Used for moves that rotate the bed without any surface length to pace.
    rotary_feedrate: float = 1200.0

    def pivot(self) -> PivotGeometry:
        return PivotGeometry(pivot_point=np.array([self.pivot_x, self.pivot_y, self.pivot_z]))

    def speed_limits(self) -> dict[str, float]:
        return {
            "x": self.max_speed_x, "y": self.max_speed_y, "z": self.max_speed_z,
            "u": self.max_speed_u, "v": self.max_speed_v, "e": self.max_speed_e,
        }

    def validate(self) -> list[tuple[str, str]]:
        problems = []
        for lo, hi in (("x_min", "x_max"), ("y_min", "y_max"),
                       ("z_min", "z_max"), ("u_min", "u_max")):
            if getattr(self, lo) >= getattr(self, hi):
                problems.append((lo, f"{lo} must be < {hi}"))
        for name in ("max_speed_x", "max_speed_y", "max_speed_z", "max_speed_u",
                     "max_speed_v", "max_speed_e", "bed_diameter", "nozzle_tip_radius",
                     "nozzle_cone_length", "filament_diameter", "retract_speed",
                     "print_speed", "travel_speed", "rotary_feedrate"):
            if getattr(self, name) <= 0:
                problems.append((name, f"{name} must be > 0"))
        if not 0 < self.nozzle_cone_half_angle < 90:
            problems.append(("nozzle_cone_half_angle", "must be in (0, 90) degrees"))
        if self.retract_length < 0:
            problems.append(("retract_length", "must be >= 0"))
        return problems


_FIELD_NAMES = [f.name for f in fields(MachineConfig)]


def parse_machine(text: str) -> MachineConfig:
    """Parse the flat key-value machine file. Fails on unknown or repeated
    keys and on a missing/unsupported header line."""
    lines = text.splitlines()
    stripped = [ln.strip() for ln in lines]
    content = [(i + 1, ln) for i, ln in enumerate(stripped) if ln and not ln.startswith("#")]
    if not content or content[0][1] != MACHINE_HEADER:
        raise ConfigError(f"missing header line {MACHINE_HEADER!r}")
    values: dict[str, float] = {}
    for line_no, line in content[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"line {line_no}: expected 'key value', got {line!r}")
        key, raw = parts
        if key not in _FIELD_NAMES:
            raise ConfigError(f"line {line_no}: unknown machine config key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        try:
            values[key] = float(raw)
        except ValueError:
            raise ConfigError(f"line {line_no}: value for {key!r} is not a number: {raw!r}")
    config = MachineConfig(**values)
    problems = config.validate()
    if problems:
        detail = "; ".join(f"{k}: {msg}" for k, msg in problems)
        raise ConfigError(f"invalid machine config: {detail}")
    return config


def render_machine(config: MachineConfig) -> str:
    lines = [MACHINE_HEADER]
    lines += [f"{name} {getattr(config, name)!r}" for name in _FIELD_NAMES]
    return "\n".join(lines) + "\n"
