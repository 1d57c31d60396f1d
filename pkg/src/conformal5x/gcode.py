"""XYZUVE G-code emission and parsing.

Dialect: RepRap-flavored with U and V as first-class rotary axis words.
Programs are absolute for XYZUV (G90) and relative for E (M83). Numbers use
fixed decimal notation at 4 places for mm, 3 for degrees, 5 for filament;
unchanged words are omitted (modal compression) except the feedrate, which is
restated whenever the move kind changes. Output is deterministic byte for
byte for identical input.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .kinematics import MachinePose

MM_DECIMALS = 4
DEG_DECIMALS = 3
E_DECIMALS = 5
F_DECIMALS = 3

PREAMBLE = ("G21", "G90", "M83")
POSTAMBLE = ("M84",)

_AXIS_WORDS = ("X", "Y", "Z", "U", "V")
_AXIS_DECIMALS = (MM_DECIMALS, MM_DECIMALS, MM_DECIMALS, DEG_DECIMALS, DEG_DECIMALS)


class GcodeError(Exception):
    pass


class MalformedLine(GcodeError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ModeConflict(GcodeError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedRecord(GcodeError):
    pass


class NonUnitNormalRecord(GcodeError):
    pass


def format_number(value: float, decimals: int) -> str:
    """Fixed-decimal formatting with negative zero normalized away."""
    s = f"{round(value + 0.0, decimals):.{decimals}f}"
    if s.startswith("-") and float(s) == 0.0:
        s = s[1:]
    return s


def format_feedrate(value: float) -> str:
    """Feedrates are rounded DOWN at 3 decimals and trailing zeros stripped,
    so a program re-checked from its own bytes can never run an axis faster
    than planned."""
    floored = math.floor(value * 10 ** F_DECIMALS + 1e-6) / 10 ** F_DECIMALS
    s = f"{floored:.{F_DECIMALS}f}".rstrip("0").rstrip(".")
    return s if s else "0"


def quantize_pose(pose: MachinePose) -> MachinePose:
    """Snap a pose onto the emission grid (what the file can represent)."""
    return MachinePose(
        x=round(pose.x + 0.0, MM_DECIMALS), y=round(pose.y + 0.0, MM_DECIMALS),
        z=round(pose.z + 0.0, MM_DECIMALS), u=round(pose.u + 0.0, DEG_DECIMALS),
        v=round(pose.v + 0.0, DEG_DECIMALS), e=round(pose.e + 0.0, E_DECIMALS),
        f=pose.f)


def emit(tagged_poses: list[tuple[str, MachinePose]]) -> str:
    """Serialize a tagged pose stream ((kind, pose) pairs) to program text.

    Travels become G0, everything else G1. E words carry per-line filament
    deltas (relative mode). Lines whose every word would repeat the previous
    state are suppressed.
    """
    lines = list(PREAMBLE)
    prev_words: dict[str, str] = {}
    prev_e = 0.0
    prev_f: str | None = None
    prev_kind: str | None = None
    for kind, pose in tagged_poses:
        words = []
        values = (pose.x, pose.y, pose.z, pose.u, pose.v)
        for letter, decimals, value in zip(_AXIS_WORDS, _AXIS_DECIMALS, values):
            s = format_number(value, decimals)
            if prev_words.get(letter) != s:
                words.append(letter + s)
        delta_e = round(pose.e - prev_e, E_DECIMALS)
        e_word = None
        if delta_e != 0.0:
            e_word = "E" + format_number(delta_e, E_DECIMALS)
        if not words and e_word is None:
            continue  # nothing moves: suppress the line entirely
        f_str = format_feedrate(pose.f)
        emit_f = kind != prev_kind or f_str != prev_f
        line = ("G0" if kind == "travel" else "G1") + " " + " ".join(words)
        if e_word:
            line += (" " if words else "") + e_word
        if emit_f:
            line += " F" + f_str
        lines.append(" ".join(line.split()))
        for letter, decimals, value in zip(_AXIS_WORDS, _AXIS_DECIMALS, values):
            prev_words[letter] = format_number(value, decimals)
        prev_e = pose.e
        prev_f = f_str
        prev_kind = kind
    lines.extend(POSTAMBLE)
    return "\n".join(lines) + "\n"


@dataclass
class ParsedProgram:
    poses: list[MachinePose] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)           # travel | extrude
    annotations: list[tuple[int, str]] = field(default_factory=list)

    def tagged(self) -> list[tuple[str, MachinePose]]:
        return list(zip(self.kinds, self.poses))


_WORD_RE = re.compile(r"^([A-Za-z])(-?(?:\d+\.?\d*|\.\d+))$")

_MOTION_LETTERS = "XYZUVEF"


def parse(text: str) -> ParsedProgram:
    """Reconstruct the absolute pose stream from program text.

    Handles G0/G1 motion with modal words, G90/G91 positioning modes, M82/M83
    extrusion modes, G92 position set, bare-word lines repeating the last
    motion command, and `;` comments. Unknown commands are kept as
    annotations rather than rejected.

    Pose e values stay physically cumulative across G92 E resets (the reset
    only re-bases the coordinate, no filament moves), so per-segment deltas
    remain meaningful for replay. XYZUV follow the commanded coordinate
    system as-is.
    """
    program = ParsedProgram()
    x = y = z = u = v = 0.0
    e = 0.0            # physical cumulative filament
    e_offset = 0.0     # physical value minus logical (G92-adjusted) value
    f: float | None = None
    positioning: str | None = None
    e_mode = "absolute"  # firmware default without an M83
    last_motion: str | None = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        body, _, comment = raw.partition(";")
        comment = comment.strip()
        if comment:
            program.annotations.append((line_no, comment))
        tokens = body.split()
        if not tokens:
            continue
        head = tokens[0].upper()
        if head in ("G0", "G1", "G00", "G01"):
            cmd = "G0" if head in ("G0", "G00") else "G1"
            words = tokens[1:]
        elif head in ("G90", "G91"):
            positioning = "absolute" if head == "G90" else "relative"
            continue
        elif head in ("M82", "M83"):
            e_mode = "absolute" if head == "M82" else "relative"
            continue
        elif head == "G21":
            continue
        elif head == "G92":
            for tok in tokens[1:]:
                m = _WORD_RE.match(tok)
                if not m or m.group(1).upper() not in _MOTION_LETTERS:
                    raise MalformedLine(line_no, f"bad G92 word {tok!r}")
                letter, value = m.group(1).upper(), float(m.group(2))
                if letter == "X":
                    x = value
                elif letter == "Y":
                    y = value
                elif letter == "Z":
                    z = value
                elif letter == "U":
                    u = value
                elif letter == "V":
                    v = value
                elif letter == "E":
                    e_offset = e - value
            continue
        elif _WORD_RE.match(tokens[0]) and tokens[0][0].upper() in _MOTION_LETTERS:
            if last_motion is None:
                raise MalformedLine(line_no, "axis word before any motion command")
            cmd = last_motion
            words = tokens
        else:
            program.annotations.append((line_no, body.strip()))
            continue

        seen: dict[str, float] = {}
        for tok in words:
            m = _WORD_RE.match(tok)
            if not m:
                raise MalformedLine(line_no, f"unparseable word {tok!r}")
            letter = m.group(1).upper()
            if letter not in _MOTION_LETTERS:
                raise MalformedLine(line_no, f"unsupported word letter {letter!r}")
            if letter in seen:
                raise MalformedLine(line_no, f"repeated word {letter!r}")
            seen[letter] = float(m.group(2))

        if any(k in seen for k in "XYZUV"):
            if positioning is None:
                raise ModeConflict(line_no, "movement before G90/G91 positioning mode")
            relative = positioning == "relative"
            x = x + seen["X"] if relative and "X" in seen else seen.get("X", x)
            y = y + seen["Y"] if relative and "Y" in seen else seen.get("Y", y)
            z = z + seen["Z"] if relative and "Z" in seen else seen.get("Z", z)
            u = u + seen["U"] if relative and "U" in seen else seen.get("U", u)
            v = v + seen["V"] if relative and "V" in seen else seen.get("V", v)
        if "E" in seen:
            e = e + seen["E"] if e_mode == "relative" else e_offset + seen["E"]
        if "F" in seen:
            if seen["F"] <= 0:
                raise MalformedLine(line_no, "feedrate must be positive")
            f = seen["F"]
        if f is None:
            raise MalformedLine(line_no, "motion before any feedrate was set")
        last_motion = cmd
        program.poses.append(MachinePose(x=x, y=y, z=z, u=u, v=v, e=e, f=f))
        program.kinds.append("travel" if cmd == "G0" else "extrude")
    return program


# ---------------------------------------------------------------------------
# CLS-style point + normal interchange

def parse_cls(text: str):
    """Parse whitespace-separated x y z i j k records into extrusion paths.

    Blank lines split paths. Normals must be unit within 1e-3 and are
    renormalized exactly. Returns a Toolpath containing only Extrude moves;
    travel planning is a separate step.
    """
    from .toolpath import Extrude, PathSample, Toolpath

    paths: list[Extrude] = []
    block: list[PathSample] = []

    def flush():
        nonlocal block
        if block:
            paths.append(Extrude(samples=tuple(block), layer=0, role="infill"))
            block = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            flush()
            continue
        body = raw.partition("#")[0].strip()
        if not body:
            continue  # comment-only line: not a path break
        parts = body.split()
        if len(parts) != 6:
            raise MalformedRecord(f"line {line_no}: expected 6 numbers, got {len(parts)}")
        try:
            numbers = [float(p) for p in parts]
        except ValueError:
            raise MalformedRecord(f"line {line_no}: non-numeric field in {body!r}")
        normal = np.array(numbers[3:])
        norm = float(np.linalg.norm(normal))
        if abs(norm - 1.0) > 1e-3:
            raise NonUnitNormalRecord(f"line {line_no}: normal length {norm:.6f} not within 1e-3 of 1")
        block.append(PathSample(position=np.array(numbers[:3]), normal=normal / norm))
    flush()
    if not paths:
        raise MalformedRecord("no records found")
    return Toolpath(moves=tuple(paths))


def render_cls(toolpath) -> str:
    """Inverse of parse_cls for round-trip tests and interchange export."""
    from .toolpath import Extrude

    blocks = []
    for move in toolpath.moves:
        if not isinstance(move, Extrude):
            continue
        lines = [" ".join(repr(float(c)) for c in (*s.position, *s.normal))
                 for s in move.samples]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
