"""Command line front end: slice, postprocess, simulate, check, serve.

Exit codes are part of the contract: 0 success, 2 usage or input error,
3 constraint violations found in the output, 4 unexpected internal failure.
Input for slice and serve is either an STL path or `demo:<name>` for the
built-in substrates; postprocess takes a point+normal toolpath text file,
and simulate/check take G-code produced here or elsewhere.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path

from .demos import DEMOS, demo_mesh, demo_params
from .gcode import GcodeError, parse, parse_cls
from .machine import ConfigError, MachineConfig, parse_machine
from .mesh import MeshError, SurfaceMesh, load_stl
from .pipeline import (
    PlannedProgram,
    check_ranges,
    check_speeds,
    plan_program,
    render_summary,
)
from .simcheck import DEFAULT_MARGIN, export_trace, replay
from .server import DEFAULT_PORT, AppState, make_server
from .toolpath import (
    ParamsError,
    SliceParams,
    ToolpathError,
    parse_params,
    plan_travels,
    slice_mesh,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_VIOLATIONS = 3
EXIT_INTERNAL = 4

_INPUT_ERRORS = (ParamsError, ConfigError, GcodeError, ToolpathError,
                 MeshError, OSError)


class InputError(Exception):
    """User-facing input problem outside the parser error hierarchy."""


@dataclass
class JobSpec:
    """Everything one command invocation needs, resolved from flags."""

    mesh: SurfaceMesh | None
    params: SliceParams
    config: MachineConfig
    output: str | None
    trace: str | None
    clamp_speeds: bool
    margin: float
    label: str


def _load_mesh(spec: str) -> tuple[SurfaceMesh, str]:
    if spec.startswith("demo:"):
        name = spec.partition(":")[2]
        if name not in DEMOS:
            raise InputError(f"unknown demo {name!r}; available: {', '.join(sorted(DEMOS))}")
        return demo_mesh(name), spec
    return load_stl(Path(spec).read_bytes()), spec


def _resolve_params(args) -> SliceParams:
    if getattr(args, "params", None):
        return parse_params(Path(args.params).read_text())
    if getattr(args, "input", "").startswith("demo:"):
        return demo_params(args.input.partition(":")[2])
    return SliceParams()


def _resolve_config(args) -> MachineConfig:
    if getattr(args, "machine", None):
        return parse_machine(Path(args.machine).read_text())
    return MachineConfig()


def _validate_params(params: SliceParams) -> None:
    problems = params.validate()
    if problems:
        raise ParamsError("; ".join(f"{field}: {msg}" for field, msg in problems))


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _finish_program(job: JobSpec, program: PlannedProgram) -> int:
    """Shared tail of slice/postprocess: write outputs, report, exit code."""
    _write(job.output, program.gcode())
    summary = render_summary(program)
    if job.output is None or job.output == "-":
        sys.stderr.write(summary)
    else:
        sys.stdout.write(summary)
        _info(f"wrote {program.summary()['segments']} segments to {job.output}")
    if job.trace:
        trace = replay(program.tagged_poses, job.config, mesh=job.mesh,
                       margin=job.margin)
        _write(job.trace, export_trace(trace))
        _info(f"wrote {len(trace.frames)} frames to {job.trace} "
              f"({len(trace.flagged())} flagged)")
    if program.speed_violations or program.range_violations:
        for index, violation in program.speed_violations:
            _info(f"segment {index}: {violation}")
        for violation in program.range_violations:
            _info(str(violation))
        return EXIT_VIOLATIONS
    return EXIT_OK


def _job_from_args(args, mesh: SurfaceMesh | None, label: str) -> JobSpec:
    params = _resolve_params(args)
    _validate_params(params)
    return JobSpec(mesh=mesh, params=params, config=_resolve_config(args),
                   output=getattr(args, "output", None),
                   trace=getattr(args, "trace", None),
                   clamp_speeds=getattr(args, "clamp_speeds", False),
                   margin=getattr(args, "margin", DEFAULT_MARGIN),
                   label=label)


def cmd_slice(args) -> int:
    mesh, label = _load_mesh(args.input)
    job = _job_from_args(args, mesh, label)
    toolpath = slice_mesh(mesh, job.params)
    program = plan_program(toolpath, job.params, job.config,
                           clamp_speeds=job.clamp_speeds)
    return _finish_program(job, program)


def cmd_postprocess(args) -> int:
    job = _job_from_args(args, None, args.input)
    paths = list(parse_cls(Path(args.input).read_text()).extrudes())
    toolpath = plan_travels(paths, job.params)
    program = plan_program(toolpath, job.params, job.config,
                           clamp_speeds=job.clamp_speeds)
    return _finish_program(job, program)


def _load_optional_mesh(args) -> SurfaceMesh | None:
    if getattr(args, "stl", None):
        return _load_mesh(args.stl)[0]
    return None


def cmd_simulate(args) -> int:
    config = _resolve_config(args)
    mesh = _load_optional_mesh(args)
    parsed = parse(Path(args.input).read_text())
    trace = replay(parsed.tagged(), config, mesh=mesh, margin=args.margin)
    _write(args.output, export_trace(trace))
    flagged = trace.flagged()
    _info(f"{len(trace.frames)} frames, {len(flagged)} flagged, "
          f"total time {trace.total_time:.1f} s")
    return EXIT_VIOLATIONS if any(
        flag.startswith("collision") or flag == "axis_violation"
        for frame in flagged for flag in frame.flags) else EXIT_OK


def cmd_check(args) -> int:
    config = _resolve_config(args)
    tagged = parse(Path(args.input).read_text()).tagged()
    _, speed_violations = check_speeds(tagged, config)
    range_violations = check_ranges(tagged, config)
    for index, violation in speed_violations:
        print(f"segment {index}: {violation}")
    for violation in range_violations:
        print(str(violation))
    if speed_violations or range_violations:
        _info(f"{len(speed_violations) + len(range_violations)} violations")
        return EXIT_VIOLATIONS
    print("no violations")
    return EXIT_OK


def cmd_serve(args) -> int:
    mesh, label = _load_mesh(args.input)
    job = _job_from_args(args, mesh, label)
    state = AppState(mesh=mesh, params=job.params, config=job.config,
                     label=label, margin=job.margin)
    server = make_server(state, host=args.host, port=args.port)
    host, port = server.server_address[:2]
    _info(f"serving {label} on http://{host}:{port} (Ctrl-C stops)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        _info("stopped")
    finally:
        server.server_close()
    return EXIT_OK


def _add_common(sub, output_default=None):
    sub.add_argument("--machine", help="machine config file (defaults built in)")
    sub.add_argument("--output", "-o", default=output_default,
                     help="output path ('-' or omitted: stdout)")


def _add_plan_flags(sub):
    sub.add_argument("--params", help="slicing parameter file")
    sub.add_argument("--clamp-speeds", action="store_true",
                     help="slow offending segments to the worst axis limit")
    sub.add_argument("--trace", help="also simulate and write a trace file")
    sub.add_argument("--margin", type=float, default=DEFAULT_MARGIN,
                     help="near-collision warning distance in mm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conformal5x",
        description="Conformal slicer and 5-axis post-processor for "
                    "tilting/rotating-bed FFF printers.")
    commands = parser.add_subparsers(dest="command", required=True)

    sl = commands.add_parser("slice", help="STL to 5-axis G-code")
    sl.add_argument("input", help="substrate STL path or demo:<name>")
    _add_plan_flags(sl)
    _add_common(sl)
    sl.set_defaults(func=cmd_slice)

    pp = commands.add_parser("postprocess",
                             help="point+normal toolpath file to G-code")
    pp.add_argument("input", help="toolpath text file (x y z i j k records)")
    _add_plan_flags(pp)
    _add_common(pp)
    pp.set_defaults(func=cmd_postprocess)

    sim = commands.add_parser("simulate", help="G-code to collision trace")
    sim.add_argument("input", help="G-code file")
    sim.add_argument("--stl", help="substrate STL path or demo:<name>")
    sim.add_argument("--margin", type=float, default=DEFAULT_MARGIN,
                     help="near-collision warning distance in mm")
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)

    ck = commands.add_parser("check", help="report limit violations in G-code")
    ck.add_argument("input", help="G-code file")
    ck.add_argument("--machine", help="machine config file (defaults built in)")
    ck.set_defaults(func=cmd_check)

    sv = commands.add_parser("serve", help="local HTTP service for the viewer")
    sv.add_argument("input", help="substrate STL path or demo:<name>")
    sv.add_argument("--params", help="baseline slicing parameter file")
    sv.add_argument("--machine", help="machine config file (defaults built in)")
    sv.add_argument("--host", default="127.0.0.1", help="bind address")
    sv.add_argument("--port", type=int, default=DEFAULT_PORT)
    sv.add_argument("--margin", type=float, default=DEFAULT_MARGIN,
                    help="near-collision warning distance in mm")
    sv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, *_INPUT_ERRORS) as err:
        _info(f"error: {err}")
        return EXIT_INPUT
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
