"""Deterministic rigid-rod dynamics under tension-only spring-damper cables.

The integrator is semi-implicit (symplectic) Euler with velocities updated
before positions, quaternions renormalized every step.  Cables pull but
never push: the total spring-plus-damping tension ``k*X + b*V`` is clamped
at zero, and slack cables (``X <= 0``) carry no force at all.

Commanded timesteps larger than the structure's explicit-stability bound
are subdivided internally (see :func:`substeps_per_step`); results remain
deterministic because the subdivision is a pure function of the structure
and ``dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import quat_conjugate, quat_rotate, vec3
from .model import (
    CompiledStructure,
    SimState,
    anchor_position,
    anchor_velocity,
    compile_structure,
    endpoints,
    max_endpoint_speed,
)
from .structure import CableSpec, Structure

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)
DEFAULT_DT = 1e-3


class SimulationFault(RuntimeError):
    """Base class for runtime simulation failures."""


class DivergenceError(SimulationFault):
    """Non-finite state detected; names the offending rod."""


class DegenerateCableError(SimulationFault):
    """Cable anchors coincide (direction undefined); names the cable."""


@dataclass(frozen=True)
class SimConfig:
    """Timestep, gravity and run-length settings."""

    dt: float = DEFAULT_DT
    gravity: tuple[float, float, float] = DEFAULT_GRAVITY
    duration: float | None = None
    n_steps: int | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        object.__setattr__(self, "gravity", tuple(float(g) for g in self.gravity))

    def resolve_steps(self) -> int:
        if self.n_steps is not None:
            return int(self.n_steps)
        if self.duration is not None:
            return int(math.floor(self.duration / self.dt))
        raise ValueError("SimConfig needs duration or n_steps")


@dataclass(frozen=True)
class CableState:
    """Instantaneous cable measurement: length, extension, rate, tension."""

    current_length: float
    extension: float
    extension_rate: float
    tension: float


def cable_force(
    spec: CableSpec,
    point_a,
    point_b,
    velocity_a=(0.0, 0.0, 0.0),
    velocity_b=(0.0, 0.0, 0.0),
    rest_length: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Force pair exerted by one cable on its two anchors.

    Returns ``(force_on_a, force_on_b)``.  Slack cables return zero pairs;
    taut cables pull each anchor toward the other with magnitude
    ``max(0, k*X + b*V)``.  The pair sums to zero exactly.
    """
    pa, pb = vec3(point_a), vec3(point_b)
    va, vb = vec3(velocity_a), vec3(velocity_b)
    rest = spec.rest_length if rest_length is None else float(rest_length)
    d = pb - pa
    length = float(np.linalg.norm(d))
    if length < kernels.MIN_CABLE_LENGTH:
        raise DegenerateCableError(
            f"cable {spec.name!r}: anchors coincide (length {length:.3e} m)"
        )
    u = d / length
    ext = length - rest
    if ext <= 0.0:
        zero = np.zeros(3)
        return zero, zero.copy()
    rate = float(np.dot(vb - va, u))
    tension = max(0.0, spec.stiffness_k * ext + spec.damping_b * rate)
    f_a = tension * u
    return f_a, -f_a


def cable_measurements(compiled: CompiledStructure, state: SimState) -> list[CableState]:
    """Per-cable length / extension / rate / tension at the given state."""
    out = []
    for j in range(compiled.n_cables):
        ia, ib = int(compiled.ca_rod[j]), int(compiled.cb_rod[j])
        sa, sb = float(compiled.ca_sgn[j]), float(compiled.cb_sgn[j])
        pa = anchor_position(compiled, state, ia, sa)
        pb = anchor_position(compiled, state, ib, sb)
        d = pb - pa
        length = float(np.linalg.norm(d))
        if length < kernels.MIN_CABLE_LENGTH:
            raise DegenerateCableError(
                f"cable {compiled.cable_names[j]!r}: anchors coincide"
            )
        u = d / length
        va = anchor_velocity(compiled, state, ia, sa)
        vb = anchor_velocity(compiled, state, ib, sb)
        rate = float(np.dot(vb - va, u))
        ext = length - float(state.rest[j])
        if ext <= 0.0:
            tension = 0.0
        else:
            tension = max(0.0, float(compiled.kk[j]) * ext + float(compiled.bb[j]) * rate)
        out.append(CableState(length, ext, rate, tension))
    return out


def cable_lengths(compiled: CompiledStructure, state: SimState) -> np.ndarray:
    pts = endpoints(compiled, state)
    pa = pts[compiled.ca_rod, ((compiled.ca_sgn + 1) / 2).astype(np.int64)]
    pb = pts[compiled.cb_rod, ((compiled.cb_sgn + 1) / 2).astype(np.int64)]
    return np.linalg.norm(pb - pa, axis=1)


@dataclass
class _ProbeSpec:
    rod: int
    sgn: float
    force: np.ndarray


def substeps_per_step(compiled: CompiledStructure, dt: float) -> int:
    """Internal subdivisions needed to integrate ``dt`` stably."""
    if not math.isfinite(compiled.dt_stable):
        return 1
    return max(1, int(math.ceil(dt / compiled.dt_stable)))


def advance_state(
    compiled: CompiledStructure,
    state: SimState,
    config: SimConfig,
    n_steps: int,
    probe: _ProbeSpec | None = None,
    speed_tol: float = 0.0,
    settle_hold: int = 1,
) -> tuple[int, int]:
    """Advance ``state`` in place by up to ``n_steps``; constant rest lengths.

    Steps are internally subdivided per the structure's stability bound, so
    stiff light rods integrate at a stable timestep whatever ``config.dt``
    commands.  With ``speed_tol > 0`` the kernel exits early once the max
    endpoint speed stays below the tolerance for ``settle_hold`` consecutive
    commanded steps.  Returns ``(steps_done, status)`` with kernel status
    codes, counting commanded steps; raises on divergence or degenerate
    cables.
    """
    if probe is None:
        probe_rod, probe_sgn = -1, 1.0
        probe_force = np.zeros(3)
    else:
        probe_rod, probe_sgn = probe.rod, probe.sgn
        probe_force = np.asarray(probe.force, dtype=np.float64)
    ns = substeps_per_step(compiled, config.dt)
    dt_sub = config.dt / ns
    sub_steps, status, bad = kernels.advance(
        state.pos,
        state.quat,
        state.vel,
        state.omg,
        state.rest,
        compiled.free,
        compiled.inv_mass,
        compiled.half,
        compiled.i_trans,
        compiled.i_axial,
        compiled.ca_rod,
        compiled.ca_sgn,
        compiled.cb_rod,
        compiled.cb_sgn,
        compiled.kk,
        compiled.bb,
        np.asarray(config.gravity),
        dt_sub,
        int(n_steps) * ns,
        probe_rod,
        probe_sgn,
        probe_force,
        speed_tol,
        int(settle_hold) * ns,
    )
    if sub_steps == n_steps * ns:
        state.time += n_steps * config.dt
    else:
        state.time += sub_steps * dt_sub
    if status == kernels.STATUS_DIVERGED:
        raise DivergenceError(
            f"simulation diverged at t={state.time:.6g} s "
            f"(rod {compiled.rod_names[bad]!r} has non-finite state)"
        )
    if status == kernels.STATUS_DEGENERATE:
        raise DegenerateCableError(
            f"cable {compiled.cable_names[bad]!r} collapsed to zero length "
            f"at t={state.time:.6g} s"
        )
    return sub_steps // ns, status


def step(
    structure: Structure | CompiledStructure,
    state: SimState,
    commands: dict | None = None,
    config: SimConfig | None = None,
) -> SimState:
    """One semi-implicit Euler update; pure (returns a new state).

    ``commands`` maps cable names to (already motor-filtered) rest lengths
    applied before the update.  Identical inputs produce bit-identical
    outputs.
    """
    compiled = structure if isinstance(structure, CompiledStructure) else compile_structure(structure)
    cfg = config or SimConfig()
    nxt = state.copy()
    if commands:
        for name, value in commands.items():
            nxt.rest[compiled.cable_index[name]] = float(value)
    advance_state(compiled, nxt, cfg, 1)
    return nxt


def total_energy(
    structure: Structure | CompiledStructure,
    state: SimState,
    gravity=DEFAULT_GRAVITY,
) -> float:
    """Kinetic + gravitational + taut-cable elastic energy, in joules.

    Gravitational potential is measured against the world origin plane.
    """
    compiled = structure if isinstance(structure, CompiledStructure) else compile_structure(structure)
    g = vec3(gravity)
    kinetic = 0.0
    potential = 0.0
    for i in range(compiled.n_rods):
        m = float(compiled.mass[i])
        kinetic += 0.5 * m * float(np.dot(state.vel[i], state.vel[i]))
        w_body = quat_rotate(quat_conjugate(state.quat[i]), state.omg[i])
        it, ia = float(compiled.i_trans[i]), float(compiled.i_axial[i])
        kinetic += 0.5 * (
            it * (w_body[0] ** 2 + w_body[1] ** 2) + ia * w_body[2] ** 2
        )
        potential -= m * float(np.dot(g, state.pos[i]))
    elastic = 0.0
    for j, cs in enumerate(cable_measurements(compiled, state)):
        if cs.extension > 0.0:
            elastic += 0.5 * float(compiled.kk[j]) * cs.extension**2
    return kinetic + potential + elastic


def momentum(compiled: CompiledStructure, state: SimState) -> np.ndarray:
    """Total linear momentum (kg m/s)."""
    return (compiled.mass[:, None] * state.vel).sum(axis=0)


__all__ = [
    "SimConfig",
    "SimState",
    "CableState",
    "SimulationFault",
    "DivergenceError",
    "DegenerateCableError",
    "cable_force",
    "cable_measurements",
    "cable_lengths",
    "advance_state",
    "step",
    "total_energy",
    "momentum",
    "max_endpoint_speed",
    "compile_structure",
]
