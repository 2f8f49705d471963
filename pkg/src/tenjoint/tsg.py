"""Plaintext ``.tsg`` structure files.

UTF-8, ``#`` comments, whitespace separated:

    rod <name> <ax> <ay> <az> <bx> <by> <bz> <mass> <radius>
    cable <name> <rodA>.<A|B> <rodB>.<A|B> <k> <b> <rest> <role> [<min> <max> <vmax> <amax>]
    fix <rod>.<A|B>
    pair <label> <cable1> <cable2>

Active cables without an explicit limit group get a documented default:
min = rest/2, max = 1.5*rest, vmax = 0.25 m/s, amax = 5 m/s^2.
"""

from __future__ import annotations

import math

from .structure import Anchor, CablePair, CableSpec, RodSpec, Structure, StructureError

DEFAULT_MAX_VELOCITY = 0.25
DEFAULT_MAX_ACCELERATION = 5.0


class TsgParseError(ValueError):
    """Malformed .tsg input; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _parse_anchor(token: str, line: int) -> Anchor:
    rod, dot, end = token.rpartition(".")
    if not dot or end not in ("A", "B"):
        raise TsgParseError(line, f"expected <rod>.<A|B>, got {token!r}")
    return Anchor(rod, end)


def _num(token: str, line: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise TsgParseError(line, f"malformed number for {what}: {token!r}") from None
    if math.isnan(value):
        raise TsgParseError(line, f"{what} may not be NaN")
    return value


def parse_tsg(text: str) -> Structure:
    """Parse .tsg text into a structure; raises TsgParseError with line numbers."""
    structure = Structure()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, args = tokens[0], tokens[1:]
        try:
            if kind == "rod":
                if len(args) != 9:
                    raise TsgParseError(lineno, f"rod needs 9 fields, got {len(args)}")
                name = args[0]
                nums = [_num(t, lineno, "rod field") for t in args[1:]]
                structure = structure.add_rod(
                    RodSpec(name, tuple(nums[0:3]), tuple(nums[3:6]), nums[6], nums[7])
                )
            elif kind == "cable":
                if len(args) not in (7, 11):
                    raise TsgParseError(
                        lineno, f"cable needs 7 or 11 fields, got {len(args)}"
                    )
                name = args[0]
                anchor_a = _parse_anchor(args[1], lineno)
                anchor_b = _parse_anchor(args[2], lineno)
                k = _num(args[3], lineno, "stiffness")
                b = _num(args[4], lineno, "damping")
                rest = _num(args[5], lineno, "rest length")
                role = args[6]
                if role not in ("active", "passive"):
                    raise TsgParseError(lineno, f"role must be active|passive, got {role!r}")
                if len(args) == 11:
                    min_l = _num(args[7], lineno, "min length")
                    max_l = _num(args[8], lineno, "max length")
                    vmax = _num(args[9], lineno, "max velocity")
                    amax = _num(args[10], lineno, "max acceleration")
                elif role == "active":
                    min_l, max_l = 0.5 * rest, 1.5 * rest
                    vmax, amax = DEFAULT_MAX_VELOCITY, DEFAULT_MAX_ACCELERATION
                else:
                    min_l = max_l = rest
                    vmax = amax = 0.0
                structure = structure.add_cable(
                    CableSpec(
                        name,
                        anchor_a,
                        anchor_b,
                        stiffness_k=k,
                        damping_b=b,
                        rest_length=rest,
                        role=role,
                        min_length=min_l,
                        max_length=max_l,
                        max_velocity=vmax,
                        max_acceleration=amax,
                    )
                )
            elif kind == "fix":
                if len(args) != 1:
                    raise TsgParseError(lineno, "fix needs exactly one <rod>.<A|B>")
                anchor = _parse_anchor(args[0], lineno)
                structure = structure.fix_anchor(anchor.rod, anchor.end)
            elif kind == "pair":
                if len(args) != 3:
                    raise TsgParseError(lineno, "pair needs <label> <cable1> <cable2>")
                structure = structure.add_pair(args[0], args[1], args[2])
            else:
                raise TsgParseError(lineno, f"unknown directive {kind!r}")
        except StructureError as exc:
            raise TsgParseError(lineno, str(exc)) from None
    return structure


def _f(x: float) -> str:
    return format(float(x), ".12g")


def format_tsg(structure: Structure) -> str:
    """Canonical text for a structure; deterministic, comment-free payload."""
    lines = []
    for r in structure.rods:
        lines.append(
            "rod {} {} {}".format(
                r.name,
                " ".join(_f(v) for v in (*r.endpoint_a, *r.endpoint_b)),
                f"{_f(r.mass)} {_f(r.radius)}",
            )
        )
    for c in structure.cables:
        base = (
            f"cable {c.name} {c.anchor_a} {c.anchor_b} "
            f"{_f(c.stiffness_k)} {_f(c.damping_b)} {_f(c.rest_length)} {c.role}"
        )
        if c.is_active:
            base += f" {_f(c.min_length)} {_f(c.max_length)} {_f(c.max_velocity)} {_f(c.max_acceleration)}"
        lines.append(base)
    for a in structure.fixed_anchors:
        lines.append(f"fix {a}")
    for p in structure.pairs:
        lines.append(f"pair {p.label} {p.first} {p.second}")
    return "\n".join(lines) + "\n"


def load_tsg(path) -> Structure:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_tsg(fh.read())


def save_tsg(structure: Structure, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_tsg(structure))
