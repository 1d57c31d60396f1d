"""Run the full pipeline on both demo substrates and keep every artifact.

For each demo: slice with speed clamping, write G-code, simulate, write the
trace, and print the summary block. The hemisphere exercises the whole
machine: tilted poses, rotary unwrapping across the pole, feedrate clamping
near the V-axis singularity, and collision-checked travels.
"""

import argparse
import sys
from pathlib import Path

from conformal5x.demos import DEMOS, demo_mesh, demo_params
from conformal5x.machine import MachineConfig
from conformal5x.pipeline import plan_program, render_summary
from conformal5x.simcheck import export_trace, replay
from conformal5x.toolpath import slice_mesh


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_outputs", help="output directory")
    parser.add_argument("--no-clamp", action="store_true",
                        help="keep feedrates unclamped (hemisphere will report violations)")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = MachineConfig()
    failures = 0
    for name in sorted(DEMOS):
        params = demo_params(name)
        mesh = demo_mesh(name)
        program = plan_program(slice_mesh(mesh, params), params, config,
                               clamp_speeds=not args.no_clamp)
        (out / f"{name}.gcode").write_text(program.gcode())
        trace = replay(program.tagged_poses, config, mesh=mesh)
        (out / f"{name}.trace").write_text(export_trace(trace))
        print(f"=== {name} ===")
        print(render_summary(program), end="")
        print(f"trace: {len(trace.frames)} frames, {len(trace.flagged())} flagged, "
              f"{trace.total_time:.1f} s simulated")
        if program.speed_violations or program.range_violations:
            failures += 1
    return 3 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
