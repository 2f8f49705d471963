"""Compilation of a :class:`~tenjoint.structure.Structure` into flat arrays.

The kernel works on index-addressed float64 arrays; this module owns the
mapping between named specs and array slots, plus the value-semantic
:class:`SimState` that the integrator advances.

A rod with any fixed anchor is held fully static: the fix is interpreted
as a rigid world mount (chassis clamp), so pinned endpoints never move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import quat_between, quat_rotate, vec3
from .structure import Structure, StructureError, validate


@dataclass(frozen=True)
class CompiledStructure:
    """Array view of a structure, shared by every simulation of it."""

    structure: Structure
    rod_names: tuple[str, ...]
    cable_names: tuple[str, ...]
    rod_index: dict
    cable_index: dict
    mass: np.ndarray
    inv_mass: np.ndarray
    half: np.ndarray
    radius: np.ndarray
    i_trans: np.ndarray
    i_axial: np.ndarray
    free: np.ndarray
    init_pos: np.ndarray
    init_quat: np.ndarray
    ca_rod: np.ndarray
    ca_sgn: np.ndarray
    cb_rod: np.ndarray
    cb_sgn: np.ndarray
    kk: np.ndarray
    bb: np.ndarray
    rest0: np.ndarray
    active_idx: np.ndarray
    dt_stable: float

    @property
    def n_rods(self) -> int:
        return len(self.rod_names)

    @property
    def n_cables(self) -> int:
        return len(self.cable_names)

    def end_effector_anchor(self) -> tuple[int, float]:
        """Index and endpoint sign of the end-effector marker.

        Defaults to endpoint B of the last rod when the structure carries no
        explicit marker.
        """
        marker = self.structure.end_effector
        if marker is None:
            return self.n_rods - 1, 1.0
        return self.rod_index[marker.rod], 1.0 if marker.end == "B" else -1.0


@lru_cache(maxsize=64)
def compile_structure(structure: Structure) -> CompiledStructure:
    """Freeze a validated structure into kernel-ready arrays."""
    report = validate(structure)
    if not report.ok:
        raise StructureError(f"cannot compile an invalid structure:\n{report}")
    if not structure.rods:
        raise StructureError("cannot compile an empty structure")

    rods = structure.rods
    cables = structure.cables
    n, nc = len(rods), len(cables)
    rod_names = tuple(r.name for r in rods)
    cable_names = tuple(c.name for c in cables)
    rod_index = {name: i for i, name in enumerate(rod_names)}
    cable_index = {name: j for j, name in enumerate(cable_names)}

    mass = np.array([r.mass for r in rods])
    radius = np.array([r.radius for r in rods])
    length = np.array([r.length for r in rods])
    half = 0.5 * length
    # uniform solid cylinder about its center of mass, axis along body z
    i_axial = 0.5 * mass * radius**2
    i_trans = mass * (length**2 / 12.0 + radius**2 / 4.0)
    fixed = np.array([structure.is_fixed(name) for name in rod_names])
    free = (~fixed).astype(np.uint8)
    inv_mass = np.where(fixed, 0.0, 1.0 / mass)

    init_pos = np.zeros((n, 3))
    init_quat = np.zeros((n, 4))
    for i, r in enumerate(rods):
        a, b = vec3(r.endpoint_a), vec3(r.endpoint_b)
        init_pos[i] = 0.5 * (a + b)
        axis = (b - a) / np.linalg.norm(b - a)
        init_quat[i] = quat_between((0.0, 0.0, 1.0), axis)

    ca_rod = np.array([rod_index[c.anchor_a.rod] for c in cables], dtype=np.int64)
    cb_rod = np.array([rod_index[c.anchor_b.rod] for c in cables], dtype=np.int64)
    ca_sgn = np.array([1.0 if c.anchor_a.end == "B" else -1.0 for c in cables])
    cb_sgn = np.array([1.0 if c.anchor_b.end == "B" else -1.0 for c in cables])
    kk = np.array([c.stiffness_k for c in cables])
    bb = np.array([c.damping_b for c in cables])
    rest0 = np.array([c.rest_length for c in cables])
    active_idx = np.array(
        [j for j, c in enumerate(cables) if c.is_active], dtype=np.int64
    )

    if nc == 0:
        ca_rod = np.zeros(0, dtype=np.int64)
        cb_rod = np.zeros(0, dtype=np.int64)

    dt_stable = _stable_timestep(
        mass, i_trans, half, free, ca_rod, cb_rod, kk, bb
    )

    arrays = dict(
        mass=mass,
        inv_mass=inv_mass,
        half=half,
        radius=radius,
        i_trans=i_trans,
        i_axial=i_axial,
        free=free,
        init_pos=init_pos,
        init_quat=init_quat,
        ca_rod=ca_rod,
        ca_sgn=ca_sgn,
        cb_rod=cb_rod,
        cb_sgn=cb_sgn,
        kk=kk,
        bb=bb,
        rest0=rest0,
        active_idx=active_idx,
    )
    for arr in arrays.values():
        arr.setflags(write=False)

    return CompiledStructure(
        structure=structure,
        rod_names=rod_names,
        cable_names=cable_names,
        rod_index=rod_index,
        cable_index=cable_index,
        dt_stable=dt_stable,
        **arrays,
    )


def _stable_timestep(mass, i_trans, half, free, ca_rod, cb_rod, kk, bb) -> float:
    """Conservative explicit-integration timestep bound for this structure.

    Per free rod, bound the summed cable stiffness and damping it can see,
    translationally and rotationally (worst-case moment arm = half length),
    and require both the frequency (``w*dt <= 0.4``) and the damping decay
    (``c*dt/m <= 0.4``) to stay well inside the semi-implicit stability
    region.  Steps larger than this are internally subdivided.
    """
    margin = 0.4
    n = len(mass)
    k_sum = np.zeros(n)
    c_sum = np.zeros(n)
    k_rot = np.zeros(n)
    c_rot = np.zeros(n)
    for j in range(len(ca_rod)):
        for i in (int(ca_rod[j]), int(cb_rod[j])):
            k_sum[i] += kk[j]
            c_sum[i] += bb[j]
            k_rot[i] += kk[j] * half[i] ** 2
            c_rot[i] += bb[j] * half[i] ** 2
    dt = math.inf
    for i in range(n):
        if free[i] == 0:
            continue
        if k_sum[i] > 0:
            dt = min(dt, margin / math.sqrt(k_sum[i] / mass[i]))
            dt = min(dt, margin / math.sqrt(k_rot[i] / i_trans[i]))
        if c_sum[i] > 0:
            dt = min(dt, margin * mass[i] / c_sum[i])
        if c_rot[i] > 0:
            dt = min(dt, margin * i_trans[i] / c_rot[i])
    return dt


@dataclass
class SimState:
    """Instantaneous simulation state: rod kinematics plus cable rest lengths.

    Value-semantic: :meth:`copy` yields an independent state.  ``pos`` holds
    rod centers of mass, ``quat`` unit orientations (w, x, y, z), ``rest``
    the per-cable rest lengths in structure order.
    """

    time: float
    pos: np.ndarray
    quat: np.ndarray
    vel: np.ndarray
    omg: np.ndarray
    rest: np.ndarray

    def copy(self) -> "SimState":
        return SimState(
            time=self.time,
            pos=self.pos.copy(),
            quat=self.quat.copy(),
            vel=self.vel.copy(),
            omg=self.omg.copy(),
            rest=self.rest.copy(),
        )


def initial_state(compiled: CompiledStructure) -> SimState:
    """State at the build pose: declared geometry, zero velocity, spec rests."""
    n = compiled.n_rods
    return SimState(
        time=0.0,
        pos=compiled.init_pos.copy(),
        quat=compiled.init_quat.copy(),
        vel=np.zeros((n, 3)),
        omg=np.zeros((n, 3)),
        rest=compiled.rest0.copy(),
    )


def rod_axes(compiled: CompiledStructure, state: SimState) -> np.ndarray:
    """World-frame unit axis (A to B) of every rod, shape (n, 3)."""
    out = np.zeros((compiled.n_rods, 3))
    for i in range(compiled.n_rods):
        out[i] = quat_rotate(state.quat[i], (0.0, 0.0, 1.0))
    return out


def endpoints(compiled: CompiledStructure, state: SimState) -> np.ndarray:
    """World endpoint positions, shape (n, 2, 3); index 0 is A, 1 is B."""
    axes = rod_axes(compiled, state)
    offs = compiled.half[:, None] * axes
    out = np.stack([state.pos - offs, state.pos + offs], axis=1)
    return out


def anchor_position(compiled: CompiledStructure, state: SimState, rod: int, sgn: float) -> np.ndarray:
    axis = quat_rotate(state.quat[rod], (0.0, 0.0, 1.0))
    return state.pos[rod] + sgn * compiled.half[rod] * axis


def anchor_velocity(compiled: CompiledStructure, state: SimState, rod: int, sgn: float) -> np.ndarray:
    axis = quat_rotate(state.quat[rod], (0.0, 0.0, 1.0))
    r = sgn * compiled.half[rod] * axis
    return state.vel[rod] + np.cross(state.omg[rod], r)


def max_endpoint_speed(compiled: CompiledStructure, state: SimState) -> float:
    """Largest world speed over all free-rod endpoints."""
    top = 0.0
    for i in range(compiled.n_rods):
        if compiled.free[i] == 0:
            continue
        axis = quat_rotate(state.quat[i], (0.0, 0.0, 1.0))
        arm = compiled.half[i] * axis
        for sgn in (-1.0, 1.0):
            speed = float(np.linalg.norm(state.vel[i] + np.cross(state.omg[i], sgn * arm)))
            top = max(top, speed)
    return top


def end_effector_position(compiled: CompiledStructure, state: SimState) -> np.ndarray:
    rod, sgn = compiled.end_effector_anchor()
    return anchor_position(compiled, state, rod, sgn)
