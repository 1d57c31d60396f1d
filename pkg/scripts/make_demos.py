"""Write the built-in demo inputs to disk as ordinary files.

Produces, per demo: the substrate STL, a matching slicing parameter file,
and one shared machine config. Useful for editing a starting point or for
feeding the CLI paths instead of demo: names.
"""

import argparse
from pathlib import Path

from conformal5x.demos import DEMOS, demo_params
from conformal5x.machine import MachineConfig, render_machine
from conformal5x.toolpath import render_params


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_inputs", help="output directory")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, stl_factory in sorted(DEMOS.items()):
        (out / f"{name}.stl").write_bytes(stl_factory())
        (out / f"{name}.params.txt").write_text(render_params(demo_params(name)))
        print(f"wrote {out / name}.stl and {name}.params.txt")
    (out / "machine.txt").write_text(render_machine(MachineConfig()))
    print(f"wrote {out / 'machine.txt'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
