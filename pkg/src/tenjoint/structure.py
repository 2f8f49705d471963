"""Declaration and validation of rigid-rod / cable tensegrity structures.

A :class:`Structure` is an immutable value: builder operations (`add_rod`,
`add_cable`, `transform`, `compose`, ...) return new structures.  Validation
never raises for structural problems; it returns a report listing every
violated invariant.

Conventions
-----------
* Units are SI throughout (m, kg, s, N).
* Names are case-sensitive identifiers matching ``[A-Za-z0-9_.-]+``.
* Cables anchor at rod endpoints only, addressed as ``(rod_name, "A"|"B")``.
* Rods never touch: pairwise rod-endpoint distances must exceed the sum of
  the rod radii.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import quat_is_unit, quat_rotate, vec3

NAME_RE = re.compile(r"[A-Za-z0-9_.-]+\Z")

ENDPOINT_TAGS = ("A", "B")


class StructureError(ValueError):
    """Raised for invalid builder operations (bad specs, name collisions)."""


def _check_name(name: str, kind: str) -> None:
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise StructureError(f"invalid {kind} name {name!r}: must match [A-Za-z0-9_.-]+")


def _check_endpoint(end: str) -> None:
    if end not in ENDPOINT_TAGS:
        raise StructureError(f"endpoint tag must be 'A' or 'B', got {end!r}")


def _as_point(p) -> tuple[float, float, float]:
    x, y, z = (float(v) for v in p)
    return (x, y, z)


@dataclass(frozen=True)
class RodSpec:
    """Rigid compression element: a uniform solid cylinder between two points."""

    name: str
    endpoint_a: tuple[float, float, float]
    endpoint_b: tuple[float, float, float]
    mass: float
    radius: float

    def __post_init__(self):
        _check_name(self.name, "rod")
        object.__setattr__(self, "endpoint_a", _as_point(self.endpoint_a))
        object.__setattr__(self, "endpoint_b", _as_point(self.endpoint_b))
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.mass > 0:
            raise StructureError(f"rod {self.name!r}: mass must be > 0, got {self.mass}")
        if not self.radius > 0:
            raise StructureError(f"rod {self.name!r}: radius must be > 0, got {self.radius}")
        if not self.length > 0:
            raise StructureError(f"rod {self.name!r}: degenerate (endpoints coincide)")

    @property
    def length(self) -> float:
        return math.dist(self.endpoint_a, self.endpoint_b)

    def endpoint(self, end: str) -> tuple[float, float, float]:
        _check_endpoint(end)
        return self.endpoint_a if end == "A" else self.endpoint_b


@dataclass(frozen=True)
class Anchor:
    """Reference to a rod endpoint, ``(rod name, 'A'|'B')``."""

    rod: str
    end: str

    def __post_init__(self):
        _check_name(self.rod, "rod")
        _check_endpoint(self.end)

    def __str__(self) -> str:
        return f"{self.rod}.{self.end}"


@dataclass(frozen=True)
class CableSpec:
    """Tension element: linear spring-damper between two rod endpoints.

    The restoring pull is ``k * X + b * V`` for extension ``X = L - rest`` and
    extension rate ``V``; slack cables (X <= 0) carry no force.  Active cables
    have a motor-driven rest length bounded by ``min_length``/``max_length``
    and rate-limited by ``max_velocity``/``max_acceleration``; for passive
    cables the actuation limits are unused.
    """

    name: str
    anchor_a: Anchor
    anchor_b: Anchor
    stiffness_k: float
    damping_b: float
    rest_length: float
    role: str = "passive"
    min_length: float | None = None
    max_length: float | None = None
    max_velocity: float = math.inf
    max_acceleration: float = math.inf

    def __post_init__(self):
        _check_name(self.name, "cable")
        if not isinstance(self.anchor_a, Anchor):
            object.__setattr__(self, "anchor_a", Anchor(*self.anchor_a))
        if not isinstance(self.anchor_b, Anchor):
            object.__setattr__(self, "anchor_b", Anchor(*self.anchor_b))
        for f in ("stiffness_k", "damping_b", "rest_length", "max_velocity", "max_acceleration"):
            object.__setattr__(self, f, float(getattr(self, f)))
        if self.role not in ("active", "passive"):
            raise StructureError(f"cable {self.name!r}: role must be 'active' or 'passive'")
        if not self.stiffness_k > 0:
            raise StructureError(f"cable {self.name!r}: stiffness_k must be > 0")
        if self.damping_b < 0:
            raise StructureError(f"cable {self.name!r}: damping_b must be >= 0")
        if not self.rest_length > 0:
            raise StructureError(f"cable {self.name!r}: rest_length must be > 0")
        min_l = self.rest_length if self.min_length is None else float(self.min_length)
        max_l = self.rest_length if self.max_length is None else float(self.max_length)
        object.__setattr__(self, "min_length", min_l)
        object.__setattr__(self, "max_length", max_l)
        if not (0 < self.min_length <= self.rest_length <= self.max_length):
            raise StructureError(
                f"cable {self.name!r}: need 0 < min_length <= rest_length <= max_length, "
                f"got min={self.min_length} rest={self.rest_length} max={self.max_length}"
            )
        if self.max_velocity < 0 or self.max_acceleration < 0:
            raise StructureError(f"cable {self.name!r}: motor limits must be >= 0")
        if self.anchor_a.rod == self.anchor_b.rod:
            raise StructureError(f"cable {self.name!r}: anchors must reference distinct rods")

    @property
    def is_active(self) -> bool:
        return self.role == "active"


@dataclass(frozen=True)
class CablePair:
    """Two same-role cables coupled as an antagonistic pair.

    Active pairs are actuatable (one shortens as the other lengthens);
    passive pairs record the opposing-placement grouping of stabilizer
    cables.
    """

    label: str
    first: str
    second: str

    def __post_init__(self):
        _check_name(self.label, "pair label")
        _check_name(self.first, "cable")
        _check_name(self.second, "cable")
        if self.first == self.second:
            raise StructureError(f"pair {self.label!r}: cables must be distinct")


@dataclass(frozen=True)
class ElbowFrame:
    """Measurement frame attached to an elbow-style structure.

    ``axis_down`` is the humerus axis (proximal to distal), ``forward`` the
    sagittal-plane forward direction, ``left`` their right-handed normal.
    ``pitch_ref``/``yaw_ref`` hold the raw angles of the reference pose so
    reported angles are zero there.
    """

    humerus: str
    olecranon: str
    forearm: str
    axis_down: tuple[float, float, float]
    forward: tuple[float, float, float]
    left: tuple[float, float, float]
    pitch_ref: float = 0.0
    yaw_ref: float = 0.0


@dataclass(frozen=True)
class Structure:
    """Validated-on-demand assembly of rods, cables, anchors and pairs."""

    rods: tuple[RodSpec, ...] = ()
    cables: tuple[CableSpec, ...] = ()
    fixed_anchors: tuple[Anchor, ...] = ()
    pairs: tuple[CablePair, ...] = ()
    end_effector: Anchor | None = None
    elbow: ElbowFrame | None = None

    # -- lookups ---------------------------------------------------------

    def rod(self, name: str) -> RodSpec:
        for r in self.rods:
            if r.name == name:
                return r
        raise KeyError(f"no rod named {name!r}")

    def cable(self, name: str) -> CableSpec:
        for c in self.cables:
            if c.name == name:
                return c
        raise KeyError(f"no cable named {name!r}")

    def pair(self, label: str) -> CablePair:
        for p in self.pairs:
            if p.label == label:
                return p
        raise KeyError(f"no pair labelled {label!r}")

    def has_rod(self, name: str) -> bool:
        return any(r.name == name for r in self.rods)

    def has_cable(self, name: str) -> bool:
        return any(c.name == name for c in self.cables)

    def anchor_point(self, anchor: Anchor) -> np.ndarray:
        return vec3(self.rod(anchor.rod).endpoint(anchor.end))

    @property
    def active_cables(self) -> tuple[CableSpec, ...]:
        return tuple(c for c in self.cables if c.is_active)

    def is_fixed(self, rod_name: str) -> bool:
        return any(a.rod == rod_name for a in self.fixed_anchors)

    # -- builder operations ----------------------------------------------

    def add_rod(self, rod: RodSpec) -> "Structure":
        if self.has_rod(rod.name):
            raise StructureError(f"duplicate rod name {rod.name!r}")
        return replace(self, rods=self.rods + (rod,))

    def add_cable(self, cable: CableSpec) -> "Structure":
        if self.has_cable(cable.name):
            raise StructureError(f"duplicate cable name {cable.name!r}")
        for anchor in (cable.anchor_a, cable.anchor_b):
            if not self.has_rod(anchor.rod):
                raise StructureError(
                    f"cable {cable.name!r}: dangling anchor {anchor} (no such rod)"
                )
        return replace(self, cables=self.cables + (cable,))

    def fix_anchor(self, rod: str, end: str) -> "Structure":
        anchor = Anchor(rod, end)
        if not self.has_rod(rod):
            raise StructureError(f"cannot fix {anchor}: no such rod")
        if anchor in self.fixed_anchors:
            return self
        return replace(self, fixed_anchors=self.fixed_anchors + (anchor,))

    def add_pair(self, label: str, first: str, second: str) -> "Structure":
        pair = CablePair(label, first, second)
        if any(p.label == label for p in self.pairs):
            raise StructureError(f"duplicate pair label {label!r}")
        for name in (pair.first, pair.second):
            if not self.has_cable(name):
                raise StructureError(f"pair {label!r}: no cable named {name!r}")
        a, b = self.cable(pair.first), self.cable(pair.second)
        if a.role != b.role:
            raise StructureError(f"pair {label!r}: cables must share a role")
        return replace(self, pairs=self.pairs + (pair,))

    def transform(self, rotation, translation) -> "Structure":
        """Apply a rigid transform (unit quaternion + translation) to all rods."""
        if not quat_is_unit(rotation):
            raise StructureError("transform rotation must be a unit quaternion (within 1e-9)")
        t = vec3(translation)

        def mapped(p):
            return tuple(quat_rotate(rotation, vec3(p)) + t)

        rods = tuple(
            replace(r, endpoint_a=mapped(r.endpoint_a), endpoint_b=mapped(r.endpoint_b))
            for r in self.rods
        )
        elbow = self.elbow
        if elbow is not None:
            rot = lambda v: tuple(quat_rotate(rotation, vec3(v)))
            elbow = replace(
                elbow,
                axis_down=rot(elbow.axis_down),
                forward=rot(elbow.forward),
                left=rot(elbow.left),
            )
        return replace(self, rods=rods, elbow=elbow)

    def compose(self, child: "Structure", prefix: str) -> "Structure":
        """Merge ``child`` into this structure with its names prefixed."""
        _check_name(prefix, "prefix")
        ren = lambda n: f"{prefix}.{n}"
        for r in child.rods:
            if self.has_rod(ren(r.name)):
                raise StructureError(f"compose: rod name collision {ren(r.name)!r}")
        for c in child.cables:
            if self.has_cable(ren(c.name)):
                raise StructureError(f"compose: cable name collision {ren(c.name)!r}")
        for p in child.pairs:
            if any(q.label == ren(p.label) for q in self.pairs):
                raise StructureError(f"compose: pair label collision {ren(p.label)!r}")
        rods = self.rods + tuple(replace(r, name=ren(r.name)) for r in child.rods)
        cables = self.cables + tuple(
            replace(
                c,
                name=ren(c.name),
                anchor_a=Anchor(ren(c.anchor_a.rod), c.anchor_a.end),
                anchor_b=Anchor(ren(c.anchor_b.rod), c.anchor_b.end),
            )
            for c in child.cables
        )
        fixed = self.fixed_anchors + tuple(
            Anchor(ren(a.rod), a.end) for a in child.fixed_anchors
        )
        pairs = self.pairs + tuple(
            CablePair(ren(p.label), ren(p.first), ren(p.second)) for p in child.pairs
        )
        return replace(self, rods=rods, cables=cables, fixed_anchors=fixed, pairs=pairs)

    def filter_prefix(self, prefix: str) -> "Structure":
        """Extract the sub-structure whose names carry ``prefix.``, stripping it."""
        _check_name(prefix, "prefix")
        head = f"{prefix}."
        strip = lambda n: n[len(head):]
        keep_rod = lambda n: n.startswith(head)
        rods = tuple(replace(r, name=strip(r.name)) for r in self.rods if keep_rod(r.name))
        cables = tuple(
            replace(
                c,
                name=strip(c.name),
                anchor_a=Anchor(strip(c.anchor_a.rod), c.anchor_a.end),
                anchor_b=Anchor(strip(c.anchor_b.rod), c.anchor_b.end),
            )
            for c in self.cables
            if c.name.startswith(head)
        )
        fixed = tuple(
            Anchor(strip(a.rod), a.end) for a in self.fixed_anchors if keep_rod(a.rod)
        )
        pairs = tuple(
            CablePair(strip(p.label), strip(p.first), strip(p.second))
            for p in self.pairs
            if p.label.startswith(head)
        )
        return Structure(rods=rods, cables=cables, fixed_anchors=fixed, pairs=pairs)


# -- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "pass"
        return "\n".join(str(v) for v in self.violations)


def validate(structure: Structure) -> ValidationReport:
    """Check tensegrity invariants; violations are report entries, not faults.

    Checked: cable anchors resolve, compression elements never touch
    (pairwise rod-endpoint distance > radii sum), fixed anchors resolve,
    pairs are well formed (distinct same-role cables), and the rod graph
    connected by cables forms a single component.
    """
    out: list[Violation] = []
    rod_names = {r.name for r in structure.rods}
    if len(rod_names) != len(structure.rods):
        out.append(Violation("duplicate-name", "duplicate rod names"))
    cable_names = {c.name for c in structure.cables}
    if len(cable_names) != len(structure.cables):
        out.append(Violation("duplicate-name", "duplicate cable names"))

    for c in structure.cables:
        for anchor in (c.anchor_a, c.anchor_b):
            if anchor.rod not in rod_names:
                out.append(
                    Violation(
                        "dangling-anchor",
                        f"cable {c.name!r} anchors to missing rod {anchor.rod!r}",
                    )
                )
    for a in structure.fixed_anchors:
        if a.rod not in rod_names:
            out.append(Violation("dangling-anchor", f"fixed anchor {a} has no rod"))

    # compression elements never touch: endpoint separations beat radii sums
    rods = structure.rods
    for i in range(len(rods)):
        for j in range(i + 1, len(rods)):
            ri, rj = rods[i], rods[j]
            limit = ri.radius + rj.radius
            closest = min(
                math.dist(ei, ej)
                for ei in (ri.endpoint_a, ri.endpoint_b)
                for ej in (rj.endpoint_a, rj.endpoint_b)
            )
            if closest <= limit:
                out.append(
                    Violation(
                        "compression-contact",
                        f"rods {ri.name!r} and {rj.name!r}: endpoint distance "
                        f"{closest:.6g} m <= radii sum {limit:.6g} m",
                    )
                )

    for p in structure.pairs:
        missing = [n for n in (p.first, p.second) if n not in cable_names]
        if missing:
            out.append(
                Violation("bad-pair", f"pair {p.label!r} references missing cable(s) {missing}")
            )
            continue
        a, b = structure.cable(p.first), structure.cable(p.second)
        if a.role != b.role:
            out.append(
                Violation("bad-pair", f"pair {p.label!r} mixes active and passive cables")
            )

    if len(rods) > 1:
        adjacency: dict[str, set[str]] = {r.name: set() for r in rods}
        for c in structure.cables:
            if c.anchor_a.rod in adjacency and c.anchor_b.rod in adjacency:
                adjacency[c.anchor_a.rod].add(c.anchor_b.rod)
                adjacency[c.anchor_b.rod].add(c.anchor_a.rod)
        seen = {rods[0].name}
        stack = [rods[0].name]
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != len(rods):
            missing_rods = sorted(rod_names - seen)
            out.append(
                Violation(
                    "disconnected",
                    f"rod graph is not a single component (unreached: {missing_rods})",
                )
            )

    return ValidationReport(tuple(out))
