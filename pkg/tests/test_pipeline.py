"""Pose-planning tests: kinematic folding, extrusion accounting, feedrates,
speed clamping, and the summary block."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal5x.demos import demo_mesh, demo_params
from conformal5x.gcode import parse
from conformal5x.machine import MachineConfig
from conformal5x.pipeline import (
    PlannedProgram,
    SummaryError,
    check_ranges,
    check_speeds,
    parse_summary,
    plan_program,
    render_summary,
)
from conformal5x.toolpath import (
    Extrude,
    PathSample,
    RetractFilament,
    SliceParams,
    Toolpath,
    UnretractFilament,
    plan_travels,
    slice_mesh,
)

UP = np.array([0.0, 0.0, 1.0])


def flat_sample(x, y, z=5.1):
    return PathSample(position=np.array([x, y, z], dtype=float), normal=UP.copy())


def tilted_normal(tilt_deg, azimuth_deg):
    t, a = math.radians(tilt_deg), math.radians(azimuth_deg)
    return np.array([math.sin(t) * math.cos(a), math.sin(t) * math.sin(a), math.cos(t)])


def bead(length, nozzle=0.4, layer=0.2, filament=1.75):
    """Independent rectangular-bead arithmetic for expected E deltas."""
    return round((nozzle * layer * length) / (math.pi * (filament / 2) ** 2), 5)


class TestGoldenPlan:
    """Two parallel 10 mm lines on a flat patch, planned by hand."""

    @pytest.fixture()
    def program(self):
        a = Extrude(samples=(flat_sample(0, 0), flat_sample(10, 0)))
        b = Extrude(samples=(flat_sample(0, 2), flat_sample(10, 2)))
        toolpath = plan_travels([a, b], SliceParams())
        return plan_program(toolpath, SliceParams(), MachineConfig())

    def test_kind_sequence(self, program):
        kinds = [k for k, _ in program.tagged_poses]
        assert kinds == ["travel", "unretract", "extrude", "retract",
                         "travel", "travel", "travel",
                         "unretract", "extrude", "retract"]
        assert program.path_count == 2
        assert len(program.segments) == len(program.tagged_poses) - 1

    def test_descent_merges_into_next_path_start(self, program):
        tuples = [p.as_tuple() for _, p in program.tagged_poses]
        assert len(tuples) == len(set(tuples)) or all(
            a != b for a, b in zip(tuples, tuples[1:]))
        # The travel's descent endpoint and the next path's first sample are
        # the same machine state, so exactly one pose covers both.
        assert tuples[6][:3] == (0.0, 2.0, 5.1)
        assert program.tagged_poses[7][0] == "unretract"

    def test_extrusion_accumulation(self, program):
        de = bead(10.0)
        expected = [0.0, 1.0, round(1 + de, 5), de, de, de, de,
                    round(1 + de, 5), round(1 + 2 * de, 5), round(2 * de, 5)]
        assert [p.e for _, p in program.tagged_poses] == pytest.approx(expected, abs=1e-12)

    def test_feedrates(self, program):
        de = bead(10.0)
        d = math.sqrt(10.0 ** 2 + de ** 2)
        f_extrude = 1200.0 * d / 10.0
        expected = [3000.0, 1800.0, f_extrude, 1800.0,
                    3000.0, 3000.0, 3000.0, 1800.0, f_extrude, 1800.0]
        assert [p.f for _, p in program.tagged_poses] == pytest.approx(expected, rel=1e-12)

    def test_travel_leg_positions(self, program):
        legs = [p for k, p in program.tagged_poses][4:7]
        assert [(p.x, p.y, p.z) for p in legs] == [
            (10.0, 0.0, 7.1), (0.0, 2.0, 7.1), (0.0, 2.0, 5.1)]

    def test_planar_poses_are_untilted(self, program):
        assert all(p.u == 0.0 and p.v == 0.0 for _, p in program.tagged_poses)
        assert program.u_max == 0.0

    def test_program_text_prologue(self, program):
        lines = program.gcode().splitlines()
        assert lines[:3] == ["G21", "G90", "M83"]
        assert lines[3] == "G0 X0.0000 Y0.0000 Z5.1000 U0.000 V0.000 F3000"
        assert lines[4] == "G1 E1.00000 F1800"
        assert lines[5].startswith("G1 X10.0000 E")
        assert lines[-1] == "M84"

    def test_emitted_feedrate_never_exceeds_planned(self, program):
        parsed = parse(program.gcode())
        assert len(parsed.poses) == len(program.tagged_poses)
        for got, (_, planned) in zip(parsed.poses, program.tagged_poses):
            assert got.f <= planned.f + 1e-9

    def test_no_violations_and_time_adds_up(self, program):
        assert program.speed_violations == []
        assert program.range_violations == []
        total = sum(s.total_distance / s.feedrate for s in program.segments)
        assert program.total_time_min == pytest.approx(total, rel=1e-12)


class TestRotaryFolding:
    def plan(self, samples):
        toolpath = Toolpath(moves=(UnretractFilament(), Extrude(samples=tuple(samples)),
                                   RetractFilament()))
        return plan_program(toolpath, SliceParams(), MachineConfig())

    def test_v_unwraps_past_180(self):
        azimuths = [170, 175, 180, 185, 190]
        samples = [PathSample(np.array([0.1 * i, 0.0, 0.0]), tilted_normal(30, a))
                   for i, a in enumerate(azimuths)]
        program = self.plan(samples)
        motion = [p for k, p in program.tagged_poses if k in ("travel", "extrude")]
        assert [p.v for p in motion] == pytest.approx(azimuths, abs=2e-3)
        jumps = [abs(b.v - a.v) for a, b in
                 zip(program.tagged_poses[:-1], program.tagged_poses[1:])
                 for a, b in [(a[1], b[1])]]
        assert max(jumps) <= 180.0 + 1e-3

    def test_v_held_through_flat_patch(self):
        samples = [
            PathSample(np.array([0.0, 0.0, 0.0]), tilted_normal(30, 45)),
            PathSample(np.array([0.2, 0.0, 0.0]), UP.copy()),
            PathSample(np.array([0.4, 0.0, 0.0]), UP.copy()),
        ]
        program = self.plan(samples)
        motion = [p for k, p in program.tagged_poses if k in ("travel", "extrude")]
        assert [p.u for p in motion] == pytest.approx([30.0, 0.0, 0.0], abs=1e-9)
        assert [p.v for p in motion] == [45.0, 45.0, 45.0]


class TestSpeedEnforcement:
    def high_rotation_toolpath(self):
        samples = (
            PathSample(np.array([0.0, 0.0, 0.0]), tilted_normal(30, 0)),
            PathSample(np.array([0.2, 0.0, 0.0]), tilted_normal(30, 90)),
        )
        return Toolpath(moves=(UnretractFilament(), Extrude(samples=samples),
                               RetractFilament()))

    def test_violation_names_rotation_axis(self):
        program = plan_program(self.high_rotation_toolpath(), SliceParams(), MachineConfig())
        assert program.speed_violations
        axes = {v.axis for _, v in program.speed_violations}
        assert axes == {"v"}
        assert "axis V" in str(program.speed_violations[0][1])
        assert program.clamped == []

    def test_file_recheck_sees_the_same_violation(self):
        program = plan_program(self.high_rotation_toolpath(), SliceParams(), MachineConfig())
        parsed = parse(program.gcode())
        _, violations = check_speeds(parsed.tagged(), MachineConfig())
        assert {v.axis for _, v in violations} == {"v"}

    def test_clamping_clears_violations_and_rides_the_limit(self):
        config = MachineConfig()
        program = plan_program(self.high_rotation_toolpath(), SliceParams(), config,
                               clamp_speeds=True)
        assert program.speed_violations == []
        assert program.clamped and program.clamped_segment_count == 1
        limits = config.speed_limits()
        ratios = [speed / limits[axis]
                  for seg in program.segments
                  for axis, speed in zip("xyzuve", seg.axis_speeds)]
        worst = max(ratios)
        assert worst <= 1.0
        assert worst >= 1.0 - 1e-6

    def test_clamped_file_passes_recheck(self):
        program = plan_program(self.high_rotation_toolpath(), SliceParams(), MachineConfig(),
                               clamp_speeds=True)
        parsed = parse(program.gcode())
        _, violations = check_speeds(parsed.tagged(), MachineConfig())
        assert violations == []

    def test_range_violation_reported(self):
        samples = (flat_sample(149.0, 0.0), flat_sample(151.0, 0.0))
        toolpath = Toolpath(moves=(UnretractFilament(), Extrude(samples=samples),
                                   RetractFilament()))
        program = plan_program(toolpath, SliceParams(), MachineConfig())
        assert any(rv.axis == "x" and rv.value == 151.0 for rv in program.range_violations)
        assert "axis X" in str(program.range_violations[0])

    def test_range_boundary_is_inclusive(self):
        pose_stream = plan_program(
            Toolpath(moves=(UnretractFilament(),
                            Extrude(samples=(flat_sample(0, 0), flat_sample(150.0, 0))),
                            RetractFilament())),
            SliceParams(), MachineConfig())
        assert pose_stream.range_violations == []
        assert check_ranges(pose_stream.tagged_poses, MachineConfig()) == []


@pytest.fixture(scope="module")
def plate_program():
    mesh = demo_mesh("flat_plate")
    params = demo_params("flat_plate")
    return plan_program(slice_mesh(mesh, params), params, MachineConfig())


@pytest.fixture(scope="module")
def hemi_program():
    mesh = demo_mesh("hemisphere")
    params = demo_params("hemisphere")
    return plan_program(slice_mesh(mesh, params), params, MachineConfig(),
                        clamp_speeds=True)


class TestDemoPrograms:
    def test_plate_reduces_to_planar_machine_moves(self, plate_program):
        assert all(p.u == 0.0 and p.v == 0.0 for _, p in plate_program.tagged_poses)
        assert plate_program.speed_violations == []
        assert plate_program.range_violations == []
        assert plate_program.summary()["u_max"] == 0.0

    def test_surface_speed_holds_on_curved_substrate(self, hemi_program):
        checked = 0
        for seg in hemi_program.segments:
            if seg.kind != "extrude" or seg.index in {i for i, _ in hemi_program.clamped}:
                continue
            surface_speed = seg.surface_length / (seg.total_distance / seg.feedrate)
            assert surface_speed == pytest.approx(1200.0, rel=1e-9)
            checked += 1
        assert checked > 1000

    def test_hemisphere_tilts_to_rim_inclination(self, hemi_program):
        # Patch radius 10 on a radius-20 sphere: rim normals tilt ~30 deg.
        assert hemi_program.summary()["u_max"] == pytest.approx(30.0, abs=1.5)

    def test_hemisphere_pole_crossings_need_clamping(self, hemi_program):
        assert hemi_program.clamped
        assert hemi_program.speed_violations == []

    def test_unclamped_hemisphere_reports_rotary_violations(self):
        mesh = demo_mesh("hemisphere")
        params = demo_params("hemisphere")
        program = plan_program(slice_mesh(mesh, params), params, MachineConfig())
        assert any(v.axis == "v" for _, v in program.speed_violations)

    def test_determinism(self, plate_program):
        mesh = demo_mesh("flat_plate")
        params = demo_params("flat_plate")
        again = plan_program(slice_mesh(mesh, params), params, MachineConfig())
        assert again.gcode() == plate_program.gcode()

    def test_every_pose_emits_exactly_one_line(self, hemi_program):
        parsed = parse(hemi_program.gcode())
        assert len(parsed.poses) == len(hemi_program.tagged_poses)
        for got, (kind, planned) in zip(parsed.kinds, hemi_program.tagged_poses):
            assert got == ("travel" if kind == "travel" else "extrude")


class TestSummaryBlock:
    def sample_program(self):
        a = Extrude(samples=(flat_sample(0, 0), flat_sample(10, 0)))
        toolpath = plan_travels([a], SliceParams())
        return plan_program(toolpath, SliceParams(), MachineConfig())

    def test_round_trip(self):
        program = self.sample_program()
        block = render_summary(program)
        assert block.startswith("open5x-summary v1\n")
        assert block.endswith("end\n")
        assert parse_summary(block) == program.summary()

    def test_counts_are_ints(self):
        summary = parse_summary(render_summary(self.sample_program()))
        for key in ("paths", "poses", "segments", "speed_violations",
                    "range_violations", "clamped_segments"):
            assert isinstance(summary[key], int)
        assert isinstance(summary["time_min"], float)

    def test_missing_end_rejected(self):
        block = render_summary(self.sample_program())
        with pytest.raises(SummaryError, match="end"):
            parse_summary(block.replace("\nend\n", "\n"))

    def test_missing_header_rejected(self):
        with pytest.raises(SummaryError, match="header"):
            parse_summary("paths 1\nend\n")

    def test_bad_number_rejected(self):
        with pytest.raises(SummaryError, match="number"):
            parse_summary("open5x-summary v1\ntime_min soon\nend\n")


@st.composite
def planar_toolpaths(draw):
    n_paths = draw(st.integers(1, 3))
    paths = []
    for _ in range(n_paths):
        n = draw(st.integers(2, 5))
        x = draw(st.floats(-20, 20))
        y = draw(st.floats(-20, 20))
        samples = [flat_sample(x, y, z=0.1)]
        for _ in range(n - 1):
            x += draw(st.floats(0.05, 5))
            y += draw(st.floats(-2, 2))
            samples.append(flat_sample(x, y, z=0.1))
        paths.append(Extrude(samples=tuple(samples)))
    return plan_travels(paths, SliceParams())


class TestPlanProperties:
    @settings(max_examples=60, deadline=None)
    @given(planar_toolpaths())
    def test_planar_invariants(self, toolpath):
        program = plan_program(toolpath, SliceParams(), MachineConfig())
        poses = [p for _, p in program.tagged_poses]
        kinds = [k for k, _ in program.tagged_poses]
        assert all(p.u == 0.0 and p.v == 0.0 for p in poses)
        assert program.speed_violations == []
        assert program.range_violations == []
        for a, b in zip(poses, poses[1:]):
            assert a.as_tuple() != b.as_tuple()
        for kind, a, b in zip(kinds[1:], poses, poses[1:]):
            if kind == "extrude":
                assert b.e >= a.e
        parsed = parse(program.gcode())
        assert len(parsed.poses) == len(poses)
        for got, want in zip(parsed.poses, poses):
            assert got.x == pytest.approx(want.x, abs=1e-9)
            assert got.e == pytest.approx(want.e, abs=1e-6)
