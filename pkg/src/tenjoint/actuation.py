"""Motor-limited rest-length actuation and antagonistic coupling.

A motor tracks a desired rest length under three limits: acceleration,
velocity, and the [min_length, max_length] travel range.  The velocity
command is additionally capped by a braking envelope so the motor can
always decelerate to a stop inside its travel range without exceeding the
acceleration bound; the hard position clamp (which zeroes velocity)
remains as a backstop but is unreachable for finite commands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .structure import CableSpec, Structure


class ActuationError(ValueError):
    """Raised for commands on cables the motor model cannot drive."""


@dataclass(frozen=True)
class MotorState:
    """Rest-length servo state for one active cable."""

    cable: str
    rest_length: float
    rest_length_velocity: float = 0.0


def _braking_limit(gap: float, accel: float, dt: float) -> float:
    """Max inward speed that can still stop within ``gap`` at decel ``accel``.

    Uses the discrete braking curve with an exact-landing branch: for gaps
    below ``accel * dt**2`` the permitted speed ``gap/dt`` parks the motor
    exactly on the travel limit in one step.
    """
    if gap <= 0.0:
        return 0.0
    if math.isinf(accel):
        return math.inf
    c = 0.5 * accel * dt
    curve = math.sqrt(2.0 * accel * gap + c * c) - c
    return min(gap / dt, curve)


def filter_command(
    spec: CableSpec, motor: MotorState, desired_rest: float, dt: float
) -> MotorState:
    """Advance the motor one timestep toward ``desired_rest``.

    The velocity moves toward the value needed to reach the desired rest,
    with per-step change bounded by ``max_acceleration * dt``, magnitude
    bounded by ``max_velocity`` and by the braking envelope of the travel
    limits; the rest length then advances by ``velocity * dt`` and is
    clamped to [min_length, max_length] (velocity zeroed on clamp).
    """
    if not spec.is_active:
        raise ActuationError(f"cable {spec.name!r} is passive; it has no motor")
    if not dt > 0:
        raise ActuationError(f"dt must be > 0, got {dt}")

    rest = motor.rest_length
    vel = motor.rest_length_velocity
    a = spec.max_acceleration
    v_need = (float(desired_rest) - rest) / dt

    # feasible command: never request a speed the brakes cannot absorb
    up = _braking_limit(spec.max_length - rest, a, dt)
    down = _braking_limit(rest - spec.min_length, a, dt)
    v_cmd = min(max(v_need, -down), up)
    v_cmd = min(max(v_cmd, -spec.max_velocity), spec.max_velocity)

    dv = v_cmd - vel
    dv_max = a * dt
    dv = min(max(dv, -dv_max), dv_max)
    vel = vel + dv
    vel = min(max(vel, -spec.max_velocity), spec.max_velocity)

    rest = rest + vel * dt
    if rest <= spec.min_length:
        rest = spec.min_length
        vel = 0.0
    elif rest >= spec.max_length:
        rest = spec.max_length
        vel = 0.0
    return MotorState(motor.cable, rest, vel)


def initial_motors(structure: Structure) -> dict[str, MotorState]:
    """One motor per active cable, parked at the declared rest length."""
    return {
        c.name: MotorState(c.name, c.rest_length, 0.0)
        for c in structure.cables
        if c.is_active
    }


def apply_antagonistic(
    pair: tuple[str, str], delta: float, desired: dict[str, float]
) -> dict[str, float]:
    """Couple a delta onto an antagonistic pair of desired rest lengths.

    The first cable of the pair (the flexor-like element) is shortened by
    ``delta`` and the second lengthened by the same amount.  Coupling acts
    on desired values; motor filtering and travel clamps happen downstream.
    """
    first, second = pair
    for name in (first, second):
        if name not in desired:
            raise ActuationError(f"cable {name!r} is not in the desired-rest map")
    out = dict(desired)
    out[first] = desired[first] - float(delta)
    out[second] = desired[second] + float(delta)
    return out


def apply_cocontraction(
    pair: tuple[str, str], offset: float, desired: dict[str, float]
) -> dict[str, float]:
    """Shorten both desired rests equally, raising pretension without motion."""
    first, second = pair
    for name in (first, second):
        if name not in desired:
            raise ActuationError(f"cable {name!r} is not in the desired-rest map")
    out = dict(desired)
    out[first] = desired[first] - float(offset)
    out[second] = desired[second] - float(offset)
    return out


def pair_cables(structure: Structure, label: str) -> tuple[CableSpec, CableSpec]:
    """Resolve an actuatable pair; both cables must be active."""
    pair = structure.pair(label)
    first, second = structure.cable(pair.first), structure.cable(pair.second)
    if not (first.is_active and second.is_active):
        raise ActuationError(f"pair {label!r} is not an active pair")
    return first, second
