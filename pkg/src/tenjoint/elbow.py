"""Reference tensegrity elbow: three rods, two active pairs, five passive pairs.

The assembly hangs from a world-fixed mount at the top of the humerus rod.
The humerus is tilted backward so the hanging forearm sits well away from
the straight-down singularity of the yaw measurement.  The small transverse
olecranon rod floats behind the joint: its two lateral endpoints are the
hubs for the yaw pair and the rear stabilizers, and it transmits extension
pull to the forearm.

Anchor coordinates are reference constants chosen under left/right mirror
symmetry (see ``docs/reference_geometry.md``); the structure itself never
appears in any published drawing, so the layout is versioned and pinned by
regression tests rather than copied from anywhere.

Cable plan (14 cables, 7 pairs):

========  =======================  ======  ===========================
pair      cables                   role    placement
========  =======================  ======  ===========================
pitch     pitch_front, pitch_back  active  flexor mount->hand,
                                           extensor elbow->proximal
yaw       yaw_left, yaw_right      active  olecranon ends -> hand
sling     sling_left/right         passive suspends olecranon from elbow
guy       guy_left/right           passive mount -> olecranon (rear stay)
capsule   capsule_left/right       passive olecranon -> proximal forearm
guard     guard_left/right         passive second ply of the capsule
brace     brace_front, brace_back  passive mount->proximal, elbow->hand
========  =======================  ======  ===========================

Three rods expose only twelve distinct endpoint pairs, so two passive
cables (the guard ply) share anchor points with the capsule pair; parallel
tension elements are part of the design's redundancy story.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import unit, vec3
from .model import CompiledStructure, SimState, compile_structure, rod_axes
from .structure import (
    Anchor,
    CableSpec,
    ElbowFrame,
    RodSpec,
    Structure,
    StructureError,
)

GEOMETRY_VERSION = "v1"


@dataclass(frozen=True)
class ElbowParams:
    """Parameters of the reference elbow; defaults are geometry v1."""

    humerus_length: float = 0.30
    olecranon_length: float = 0.06
    forearm_length: float = 0.25
    humerus_mass: float = 0.02
    olecranon_mass: float = 0.005
    forearm_mass: float = 0.015
    rod_radius: float = 0.004
    active_k: float = 300.0
    passive_k: float = 150.0
    damping_b: float = 2.0
    pretension: float = 0.005
    # reference geometry v1 layout constants
    humerus_tilt_deg: float = 30.0
    olecranon_forward: float = 0.03
    olecranon_drop: float = 0.08
    forearm_dx: float = 0.0
    forearm_dz: float = 0.05
    forearm_build_angle_deg: float = 15.0
    # motor limits shared by the four active cables
    travel: float = 0.08
    max_velocity: float = 0.25
    max_acceleration: float = 5.0
    # assembly frame
    mirror: bool = False
    mount_rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    mount_translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        positive = (
            "humerus_length",
            "olecranon_length",
            "forearm_length",
            "humerus_mass",
            "olecranon_mass",
            "forearm_mass",
            "rod_radius",
            "active_k",
            "passive_k",
            "travel",
        )
        for name in positive:
            if not float(getattr(self, name)) > 0:
                raise StructureError(f"elbow parameter {name} must be > 0")
        for name in ("damping_b", "pretension", "max_velocity", "max_acceleration"):
            if float(getattr(self, name)) < 0:
                raise StructureError(f"elbow parameter {name} must be >= 0")


@dataclass(frozen=True)
class JointAngles:
    """Signed forearm angles relative to the humerus, radians."""

    pitch: float
    yaw: float
    degenerate: bool = False


def _elbow_points(params: ElbowParams) -> dict[str, np.ndarray]:
    s = -1.0 if params.mirror else 1.0
    tilt = math.radians(params.humerus_tilt_deg)
    axis_down = np.array([-math.sin(tilt), 0.0, -math.cos(tilt)])
    ha = np.zeros(3)
    hb = params.humerus_length * axis_down
    w = 0.5 * params.olecranon_length
    oc = hb + np.array([params.olecranon_forward, 0.0, -params.olecranon_drop])
    oa = oc + np.array([0.0, s * w, 0.0])
    ob = oc - np.array([0.0, s * w, 0.0])
    theta = math.radians(params.forearm_build_angle_deg)
    fa = oc + np.array([params.forearm_dx, 0.0, -params.forearm_dz])
    fb = fa + params.forearm_length * np.array(
        [math.sin(theta), 0.0, -math.cos(theta)]
    )
    return {"HA": ha, "HB": hb, "OA": oa, "OB": ob, "FA": fa, "FB": fb}


_CABLE_PLAN = (
    # name, end a, end b, active
    ("pitch_front", "HA", "FB", True),
    ("pitch_back", "HB", "FA", True),
    ("yaw_left", "OA", "FB", True),
    ("yaw_right", "OB", "FB", True),
    ("sling_left", "HB", "OA", False),
    ("sling_right", "HB", "OB", False),
    ("guy_left", "HA", "OA", False),
    ("guy_right", "HA", "OB", False),
    ("capsule_left", "OA", "FA", False),
    ("capsule_right", "OB", "FA", False),
    ("guard_left", "OA", "FA", False),
    ("guard_right", "OB", "FA", False),
    ("brace_front", "HA", "FA", False),
    ("brace_back", "HB", "FB", False),
)

_HUB_ROD = {
    "HA": ("humerus", -1.0),
    "HB": ("humerus", 1.0),
    "OA": ("olecranon", -1.0),
    "OB": ("olecranon", 1.0),
    "FA": ("forearm", -1.0),
    "FB": ("forearm", 1.0),
}


def _form_find_tensions(params: ElbowParams, pts: dict[str, np.ndarray], gravity=(0.0, 0.0, -9.81)) -> np.ndarray:
    """Solve for a taut tension distribution in static balance at the build pose.

    Minimum-deviation solution around the pretension targets
    (``pretension * k`` per cable) subject to zero net force and torque on
    the two suspended rods.  Raises if the solution drives any cable slack;
    that marks the parameter set as infeasible.
    """
    g = np.asarray(gravity, dtype=np.float64)
    free_rods = {"olecranon": 0, "forearm": 1}
    com = {
        "olecranon": 0.5 * (pts["OA"] + pts["OB"]),
        "forearm": 0.5 * (pts["FA"] + pts["FB"]),
    }
    masses = {"olecranon": params.olecranon_mass, "forearm": params.forearm_mass}

    n_cables = len(_CABLE_PLAN)
    rows = 12  # force + torque, two free rods
    a_mat = np.zeros((rows, n_cables))
    b_vec = np.zeros(rows)
    for rod, slot in free_rods.items():
        b_vec[slot * 6 : slot * 6 + 3] = -masses[rod] * g

    for j, (_, end_a, end_b, _active) in enumerate(_CABLE_PLAN):
        pa, pb = pts[end_a], pts[end_b]
        u = (pb - pa) / np.linalg.norm(pb - pa)
        for hub, direction in ((end_a, u), (end_b, -u)):
            rod, _sgn = _HUB_ROD[hub]
            if rod not in free_rods:
                continue
            slot = free_rods[rod]
            arm = pts[hub] - com[rod]
            a_mat[slot * 6 : slot * 6 + 3, j] += direction
            a_mat[slot * 6 + 3 : slot * 6 + 6, j] += np.cross(arm, direction)

    target = np.array(
        [
            params.pretension * (params.active_k if active else params.passive_k)
            for (_, _, _, active) in _CABLE_PLAN
        ]
    )
    from scipy.optimize import linprog, lsq_linear

    # stage 1: how much uniform pretension can this geometry carry?
    cap = 20.0
    c = np.zeros(n_cables + 1)
    c[-1] = -1.0
    a_eq = np.hstack([a_mat, np.zeros((rows, 1))])
    a_ub = np.hstack([-np.eye(n_cables), np.ones((n_cables, 1))])
    lp = linprog(
        c,
        A_ub=a_ub,
        b_ub=np.zeros(n_cables),
        A_eq=a_eq,
        b_eq=b_vec,
        bounds=[(0.0, cap)] * n_cables + [(0.0, cap)],
        method="highs",
    )
    if lp.status != 0 or lp.x[-1] <= 1e-5:
        raise StructureError(
            "elbow parameters admit no taut static equilibrium "
            f"(max uniform pretension {0.0 if lp.status else lp.x[-1]:.2g} N)"
        )
    floor = 0.7 * lp.x[-1]

    # stage 2: closest tension distribution to the pretension targets that
    # keeps equilibrium exactly and every cable above the floor
    lam = 1e-4
    stacked = np.vstack([a_mat, lam * np.eye(n_cables)])
    rhs = np.concatenate([b_vec, lam * np.maximum(target, floor)])
    sol = lsq_linear(
        stacked, rhs, bounds=(floor * np.ones(n_cables), cap), method="bvls", tol=1e-14
    )
    tensions = sol.x
    residual = float(np.linalg.norm(a_mat @ tensions - b_vec))
    if residual > 1e-7:
        raise StructureError(
            f"elbow parameters admit no taut static equilibrium "
            f"(force residual {residual:.3g} N)"
        )
    return tensions


def build_elbow(params: ElbowParams | None = None) -> Structure:
    """Generate and validate the reference elbow structure.

    The humerus is world-fixed at its upper endpoint; the olecranon and
    forearm are suspended in the cable network with all four active cables
    taut at the build pose.
    """
    p = params or ElbowParams()
    pts = _elbow_points(p)
    tensions = _form_find_tensions(p, pts)

    s = Structure()
    s = s.add_rod(
        RodSpec("humerus", tuple(pts["HA"]), tuple(pts["HB"]), p.humerus_mass, p.rod_radius)
    )
    s = s.add_rod(
        RodSpec("olecranon", tuple(pts["OA"]), tuple(pts["OB"]), p.olecranon_mass, p.rod_radius)
    )
    s = s.add_rod(
        RodSpec("forearm", tuple(pts["FA"]), tuple(pts["FB"]), p.forearm_mass, p.rod_radius)
    )
    s = s.fix_anchor("humerus", "A")

    for j, (name, end_a, end_b, active) in enumerate(_CABLE_PLAN):
        pa, pb = pts[end_a], pts[end_b]
        length = float(np.linalg.norm(pb - pa))
        k = p.active_k if active else p.passive_k
        rest = length - float(tensions[j]) / k
        if rest <= 0:
            raise StructureError(
                f"elbow cable {name!r}: equilibrium tension {tensions[j]:.3g} N "
                f"needs more extension than its {length:.4g} m span"
            )
        rod_a, _ = _HUB_ROD[end_a]
        rod_b, _ = _HUB_ROD[end_b]
        anchor_a = Anchor(rod_a, end_a[1])
        anchor_b = Anchor(rod_b, end_b[1])
        if active:
            spec = CableSpec(
                name,
                anchor_a,
                anchor_b,
                stiffness_k=k,
                damping_b=p.damping_b,
                rest_length=rest,
                role="active",
                min_length=max(0.25 * rest, rest - p.travel),
                max_length=rest + p.travel,
                max_velocity=p.max_velocity,
                max_acceleration=p.max_acceleration,
            )
        else:
            spec = CableSpec(
                name,
                anchor_a,
                anchor_b,
                stiffness_k=k,
                damping_b=p.damping_b,
                rest_length=rest,
                role="passive",
            )
        s = s.add_cable(spec)

    s = s.add_pair("pitch", "pitch_front", "pitch_back")
    s = s.add_pair("yaw", "yaw_left", "yaw_right")
    s = s.add_pair("sling", "sling_left", "sling_right")
    s = s.add_pair("guy", "guy_left", "guy_right")
    s = s.add_pair("capsule", "capsule_left", "capsule_right")
    s = s.add_pair("guard", "guard_left", "guard_right")
    s = s.add_pair("brace", "brace_front", "brace_back")

    s = replace(s, end_effector=Anchor("forearm", "B"))
    s = tag_elbow(s)
    rot = vec3(p.mount_translation)
    if tuple(p.mount_rotation) != (1.0, 0.0, 0.0, 0.0) or np.any(rot != 0.0):
        s = s.transform(np.asarray(p.mount_rotation, dtype=np.float64), rot)

    from .structure import validate

    report = validate(s)
    if not report.ok:
        raise StructureError(f"elbow parameters produce an invalid structure:\n{report}")
    return s


def tag_elbow(structure: Structure) -> Structure:
    """Attach (or refresh) the elbow measurement frame.

    Requires rods named ``humerus``, ``olecranon`` and ``forearm``.  The
    frame derives from the declared geometry: humerus axis, in-plane
    forward direction, and their left-handed normal; reference angles are
    taken at the declared pose.
    """
    for name in ("humerus", "olecranon", "forearm"):
        if not structure.has_rod(name):
            raise StructureError(f"not an elbow structure: missing rod {name!r}")
    hum = structure.rod("humerus")
    fore = structure.rod("forearm")
    axis_down = unit(vec3(hum.endpoint_b) - vec3(hum.endpoint_a))
    d = unit(vec3(fore.endpoint_b) - vec3(fore.endpoint_a))
    f_raw = d - float(np.dot(d, axis_down)) * axis_down
    if float(np.linalg.norm(f_raw)) < 1e-9:
        # forearm parallel to humerus: fall back to any transverse direction
        probe = np.array([1.0, 0.0, 0.0])
        if abs(float(np.dot(probe, axis_down))) > 0.9:
            probe = np.array([0.0, 1.0, 0.0])
        f_raw = probe - float(np.dot(probe, axis_down)) * axis_down
    forward = unit(f_raw)
    left = np.cross(forward, axis_down)
    frame = ElbowFrame(
        humerus="humerus",
        olecranon="olecranon",
        forearm="forearm",
        axis_down=tuple(axis_down),
        forward=tuple(forward),
        left=tuple(left),
    )
    tagged = replace(
        structure,
        elbow=frame,
        end_effector=structure.end_effector or Anchor("forearm", "B"),
    )
    pitch_raw = math.atan2(float(np.dot(d, forward)), float(np.dot(d, axis_down)))
    frame = replace(frame, pitch_ref=pitch_raw, yaw_ref=0.0)
    return replace(tagged, elbow=frame)


def looks_like_elbow(structure: Structure) -> bool:
    return all(structure.has_rod(n) for n in ("humerus", "olecranon", "forearm"))


def _forearm_direction(
    compiled: CompiledStructure, state: SimState, frame: ElbowFrame
) -> np.ndarray:
    idx = compiled.rod_index[frame.forearm]
    return rod_axes(compiled, state)[idx]


def raw_angles(structure: Structure | CompiledStructure, state: SimState) -> tuple[float, float, bool]:
    """Unreferenced (pitch, yaw, degenerate) straight from the state."""
    compiled = structure if isinstance(structure, CompiledStructure) else compile_structure(structure)
    frame = compiled.structure.elbow
    if frame is None:
        raise StructureError("structure carries no elbow frame; tag_elbow it first")
    d = _forearm_direction(compiled, state, frame)
    h = vec3(frame.axis_down)
    f = vec3(frame.forward)
    n = vec3(frame.left)
    df, dh, dn = float(np.dot(d, f)), float(np.dot(d, h)), float(np.dot(d, n))
    sag = math.hypot(df, dh)
    trans = math.hypot(df, dn)
    degenerate = sag < 1e-9 or trans < 1e-9
    pitch = math.atan2(df, dh) if sag >= 1e-9 else 0.0
    yaw = math.atan2(dn, df) if trans >= 1e-9 else 0.0
    return pitch, yaw, degenerate


def measure_angles(
    structure: Structure | CompiledStructure,
    state: SimState,
    previous: JointAngles | None = None,
) -> JointAngles:
    """Pitch and yaw of the forearm, zero at the stored reference pose.

    Pitch is the forearm direction projected into the sagittal plane,
    measured from the humerus axis (positive forward); yaw is the
    transverse-plane angle (positive to the left).  At gimbal degeneracy
    (forearm parallel to a projection normal) the previous sample is held
    and flagged.
    """
    compiled = structure if isinstance(structure, CompiledStructure) else compile_structure(structure)
    frame = compiled.structure.elbow
    if frame is None:
        raise StructureError("structure carries no elbow frame; tag_elbow it first")
    pitch, yaw, degenerate = raw_angles(compiled, state)
    if degenerate:
        if previous is not None:
            return JointAngles(previous.pitch, previous.yaw, True)
        return JointAngles(0.0, 0.0, True)
    return JointAngles(pitch - frame.pitch_ref, yaw - frame.yaw_ref, False)


def with_angle_reference(structure: Structure, state: SimState) -> Structure:
    """Re-zero the angle reference at the given pose (e.g. after settling)."""
    if structure.elbow is None:
        raise StructureError("structure carries no elbow frame; tag_elbow it first")
    pitch, yaw, degenerate = raw_angles(structure, state)
    if degenerate:
        raise StructureError("cannot re-zero angles at a gimbal-degenerate pose")
    return replace(
        structure, elbow=replace(structure.elbow, pitch_ref=pitch, yaw_ref=yaw)
    )
