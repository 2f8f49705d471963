"""Control policies: per-timestep desired rest lengths for active cables.

Policies are pure functions of :class:`PolicyInput`; any binding to a
concrete structure (nominal rest lengths, pair membership) happens once in
``prepare``.  Replaying a policy over recorded inputs reproduces its
outputs exactly.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .actuation import ActuationError, filter_command, initial_motors, pair_cables
from .dynamics import SimConfig, advance_state, cable_lengths, compile_structure
from .model import CompiledStructure, SimState, end_effector_position, initial_state
from .structure import Structure
from .telemetry import TelemetryRecord, TelemetryRecorder


@dataclass(frozen=True)
class PolicyInput:
    """Simulated sensor surface fed to a policy each tick."""

    time: float
    cable_lengths: dict
    end_effector: tuple[float, float, float]


@dataclass(frozen=True)
class PolicyOutput:
    """Desired rest lengths, keyed by active-cable name."""

    desired_rest: dict


class Policy:
    """Base policy: callable on PolicyInput after an optional prepare()."""

    description = "policy"

    def prepare(self, structure: Structure) -> None:  # pragma: no cover - default no-op
        pass

    def __call__(self, inp: PolicyInput) -> PolicyOutput:
        raise NotImplementedError


class NullPolicy(Policy):
    """Hold every active cable at its nominal rest length."""

    description = "none"

    def __init__(self):
        self._nominal: dict[str, float] = {}

    def prepare(self, structure: Structure) -> None:
        self._nominal = {c.name: c.rest_length for c in structure.active_cables}

    def __call__(self, inp: PolicyInput) -> PolicyOutput:
        return PolicyOutput(dict(self._nominal))


class PeriodicPairPolicy(Policy):
    """Sinusoidal antagonistic drive on one active pair.

    ``delta(t) = amplitude * sin(2*pi*t / period)`` shortens the first
    cable of the pair and lengthens the second by the same amount around
    their nominal rests.
    """

    def __init__(self, pair_label: str, amplitude: float, period: float):
        if amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not period > 0:
            raise ValueError("period must be > 0")
        self.pair_label = pair_label
        self.amplitude = float(amplitude)
        self.period = float(period)
        self._nominal: dict[str, float] = {}
        self._pair: tuple[str, str] | None = None

    @property
    def description(self) -> str:
        return f"{self.pair_label}:amp={self.amplitude:g},period={self.period:g}"

    def prepare(self, structure: Structure) -> None:
        first, second = pair_cables(structure, self.pair_label)
        for spec in (first, second):
            feasible = 0.5 * (spec.max_length - spec.min_length)
            if self.amplitude > feasible:
                raise ActuationError(
                    f"amplitude {self.amplitude:g} m exceeds feasible range "
                    f"{feasible:g} m of cable {spec.name!r}"
                )
        self._pair = (first.name, second.name)
        self._nominal = {c.name: c.rest_length for c in structure.active_cables}

    def __call__(self, inp: PolicyInput) -> PolicyOutput:
        if self._pair is None:
            raise ActuationError("policy not prepared against a structure")
        delta = self.amplitude * math.sin(2.0 * math.pi * inp.time / self.period)
        out = dict(self._nominal)
        first, second = self._pair
        out[first] = self._nominal[first] - delta
        out[second] = self._nominal[second] + delta
        return PolicyOutput(out)


def periodic_pair_policy(pair_label: str, amplitude: float, period: float) -> PeriodicPairPolicy:
    return PeriodicPairPolicy(pair_label, amplitude, period)


class ScriptPolicy(Policy):
    """Step-and-hold schedule: each cable holds its most recent scheduled value."""

    def __init__(self, schedule: list[tuple[float, str, float]]):
        times = [t for t, _, _ in schedule]
        if times != sorted(times):
            raise ValueError("script schedule must be sorted by time")
        self.schedule = [(float(t), str(c), float(v)) for t, c, v in schedule]
        self._nominal: dict[str, float] = {}
        self._per_cable: dict[str, tuple[list[float], list[float]]] = {}

    @property
    def description(self) -> str:
        return f"script({len(self.schedule)} events)"

    def prepare(self, structure: Structure) -> None:
        active = {c.name for c in structure.active_cables}
        for _, cable, _ in self.schedule:
            if cable not in active:
                raise ActuationError(f"script schedules unknown active cable {cable!r}")
        self._nominal = {c.name: c.rest_length for c in structure.active_cables}
        self._per_cable = {}
        for t, cable, value in self.schedule:
            times, values = self._per_cable.setdefault(cable, ([], []))
            times.append(t)
            values.append(value)

    def __call__(self, inp: PolicyInput) -> PolicyOutput:
        out = dict(self._nominal)
        for cable, (times, values) in self._per_cable.items():
            idx = bisect_right(times, inp.time)
            if idx > 0:
                out[cable] = values[idx - 1]
        return PolicyOutput(out)


def script_policy(schedule: list[tuple[float, str, float]]) -> ScriptPolicy:
    return ScriptPolicy(schedule)


def load_schedule_csv(path) -> ScriptPolicy:
    """Load ``time_s,cable,desired_rest_m`` rows into a script policy."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["time_s", "cable", "desired_rest_m"]:
            raise ValueError(
                f"{path}: expected header 'time_s,cable,desired_rest_m', got {header}"
            )
        schedule = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                schedule.append((float(row[0]), row[1].strip(), float(row[2])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return ScriptPolicy(schedule)


def run_policy(
    structure: Structure,
    initial: SimState | None,
    policy: Policy,
    config: SimConfig,
) -> TelemetryRecord:
    """Closed loop: policy -> motor filter -> dynamics step, with telemetry.

    Produces ``floor(duration/dt) + 1`` samples (the initial state plus one
    per step), time strictly increasing by dt.  Divergence faults propagate
    from the integrator.
    """
    compiled = compile_structure(structure)
    state = (initial.copy() if initial is not None else initial_state(compiled))
    n_steps = config.resolve_steps()
    policy.prepare(structure)

    motors = initial_motors(structure)
    active_names = set(motors)
    specs = {c.name: c for c in structure.active_cables}
    # motors track whatever rest lengths the incoming state carries
    for name in motors:
        idx = compiled.cable_index[name]
        motors[name] = motors[name].__class__(name, float(state.rest[idx]), 0.0)

    recorder = TelemetryRecorder(
        compiled, config, metadata={"policy": policy.description, "steps": n_steps}
    )
    recorder.sample(state)
    for _ in range(n_steps):
        lengths = cable_lengths(compiled, state)
        inp = PolicyInput(
            time=state.time,
            cable_lengths={
                name: float(lengths[j]) for j, name in enumerate(compiled.cable_names)
            },
            end_effector=tuple(end_effector_position(compiled, state)),
        )
        out = policy(inp)
        extra = set(out.desired_rest) - active_names
        if extra:
            raise ActuationError(f"policy commanded non-active cables: {sorted(extra)}")
        for name, desired in out.desired_rest.items():
            motor = filter_command(specs[name], motors[name], desired, config.dt)
            motors[name] = motor
            state.rest[compiled.cable_index[name]] = motor.rest_length
        advance_state(compiled, state, config, 1)
        recorder.sample(state)
    return recorder.finish()
