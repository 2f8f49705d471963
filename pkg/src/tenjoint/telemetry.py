"""Per-step telemetry, settling, compliance probes, and CSV export.

CSV layout (RFC 4180, CRLF, header row, 9 significant digits):
``time, ee_x, ee_y, ee_z, pitch, yaw, len_<cable>, rest_<cable>,
ten_<cable>, ..., energy`` with the per-cable triplets in structure order.
Exports are byte-deterministic for identical records; no timestamps ever
enter data files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    SimConfig,
    SimulationFault,
    _ProbeSpec,
    advance_state,
    cable_measurements,
    compile_structure,
    max_endpoint_speed,
    total_energy,
)
from .elbow import JointAngles, measure_angles
from .geometry import segment_distance
from .model import CompiledStructure, SimState, end_effector_position, endpoints
from .structure import Structure

DEFAULT_SETTLE_TOL = 1e-4
DEFAULT_SETTLE_TIMEOUT = 30.0


class NotSettledError(SimulationFault):
    """Input state was required to be settled but is still moving."""


class RestorationError(SimulationFault):
    """Structure failed to spring back after a probe was released."""


@dataclass
class TelemetryRecord:
    """Column-oriented run log plus run metadata."""

    cable_names: tuple[str, ...]
    times: np.ndarray
    ee: np.ndarray
    pitch: np.ndarray
    yaw: np.ndarray
    lengths: np.ndarray
    rests: np.ndarray
    tensions: np.ndarray
    energy: np.ndarray
    rod_points: np.ndarray | None = None
    rod_radii: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.times)


class TelemetryRecorder:
    """Accumulates per-sample rows during a simulation run."""

    def __init__(self, compiled: CompiledStructure, config: SimConfig, metadata: dict | None = None):
        self.compiled = compiled
        self.config = config
        self.metadata = dict(metadata or {})
        self.metadata.setdefault("structure_hash", structure_hash(compiled.structure))
        self.metadata.setdefault("dt", config.dt)
        self.metadata.setdefault("gravity", tuple(config.gravity))
        self._rows: list[tuple] = []
        self._angles = JointAngles(0.0, 0.0)
        self._has_frame = compiled.structure.elbow is not None

    def sample(self, state: SimState) -> None:
        c = self.compiled
        ee = end_effector_position(c, state)
        if self._has_frame:
            self._angles = measure_angles(c, state, previous=self._angles)
        measures = cable_measurements(c, state)
        self._rows.append(
            (
                state.time,
                ee.copy(),
                self._angles.pitch,
                self._angles.yaw,
                np.array([m.current_length for m in measures]),
                state.rest.copy(),
                np.array([m.tension for m in measures]),
                total_energy(c, state, self.config.gravity),
                endpoints(c, state),
            )
        )

    def finish(self) -> TelemetryRecord:
        if not self._rows:
            raise ValueError("telemetry record is empty")
        times = np.array([r[0] for r in self._rows])
        return TelemetryRecord(
            cable_names=self.compiled.cable_names,
            times=times,
            ee=np.stack([r[1] for r in self._rows]),
            pitch=np.array([r[2] for r in self._rows]),
            yaw=np.array([r[3] for r in self._rows]),
            lengths=np.stack([r[4] for r in self._rows]),
            rests=np.stack([r[5] for r in self._rows]),
            tensions=np.stack([r[6] for r in self._rows]),
            energy=np.array([r[7] for r in self._rows]),
            rod_points=np.stack([r[8] for r in self._rows]),
            rod_radii=self.compiled.radius.copy(),
            metadata=self.metadata,
        )


def structure_hash(structure: Structure) -> str:
    """Stable content hash of a structure (sha256 of its canonical text)."""
    from .tsg import format_tsg

    return hashlib.sha256(format_tsg(structure).encode("utf-8")).hexdigest()[:16]


def _settle_hold_steps(dt: float) -> int:
    # equilibrium must persist for 0.1 s of simulated time, not one sample
    return max(1, int(round(0.1 / dt)))


def settle(
    structure: Structure | CompiledStructure,
    state: SimState,
    config: SimConfig | None = None,
    tolerance: float = DEFAULT_SETTLE_TOL,
    timeout: float = DEFAULT_SETTLE_TIMEOUT,
) -> tuple[SimState, bool]:
    """Simulate passively until every rod endpoint moves slower than ``tolerance``.

    The tolerance must hold for a sustained 0.1 s window (a body momentarily
    at rest under unbalanced forces is not settled).  A state that passes
    the whole window untouched is returned unchanged.  ``timeout`` is
    simulated seconds, not wall time.
    """
    compiled = structure if isinstance(structure, CompiledStructure) else compile_structure(structure)
    cfg = config or SimConfig()
    hold = _settle_hold_steps(cfg.dt)
    budget = max(int(math.ceil(timeout / cfg.dt)), hold)
    from . import kernels

    probe = state.copy()
    steps, status = advance_state(
        compiled, probe, cfg, budget, speed_tol=tolerance, settle_hold=hold
    )
    if status != kernels.STATUS_SETTLED:
        return probe, False
    if steps == hold and max_endpoint_speed(compiled, state) < tolerance:
        # the input held the tolerance for the entire window: already settled
        return state.copy(), True
    return probe, True


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of a compliance probe at the end-effector."""

    force: tuple[float, float, float]
    displacement: np.ndarray
    restoration_distance: float
    probe_settled: bool
    release_settled: bool


def _ramp_force(
    compiled: CompiledStructure,
    state: SimState,
    cfg: SimConfig,
    probe: _ProbeSpec,
    start: float,
    stop: float,
    duration: float,
) -> None:
    # cosine ramp in small constant-force holds; an abrupt load would dump
    # energy into the assembly's nearly undamped swing about the mount axis
    n_holds = max(1, int(round(duration / (25 * cfg.dt))))
    steps_per_hold = max(1, int(round(duration / cfg.dt / n_holds)))
    full = np.asarray(probe.force, dtype=np.float64)
    for i in range(1, n_holds + 1):
        phase = 0.5 - 0.5 * math.cos(math.pi * i / n_holds)
        scale = start + (stop - start) * phase
        advance_state(
            compiled,
            state,
            cfg,
            steps_per_hold,
            probe=_ProbeSpec(probe.rod, probe.sgn, full * scale),
        )


def probe_compliance(
    structure: Structure | CompiledStructure,
    state: SimState,
    force,
    config: SimConfig | None = None,
    tolerance: float = DEFAULT_SETTLE_TOL,
    timeout: float = DEFAULT_SETTLE_TIMEOUT,
    restoration_limit: float = 1e-3,
    ramp_time: float = 3.0,
) -> ProbeResult:
    """Load the end-effector with a constant force, re-settle, and measure.

    The force is ramped up over ``ramp_time`` (quasi-statically, so the
    probe characterizes stiffness rather than impact response), held until
    the structure settles, then ramped back down.  After release the
    structure must return to within ``restoration_limit`` of the pre-probe
    end-effector position, else :class:`RestorationError` is raised.
    """
    compiled = structure if isinstance(structure, CompiledStructure) else compile_structure(structure)
    cfg = config or SimConfig()
    if max_endpoint_speed(compiled, state) >= tolerance:
        raise NotSettledError(
            "probe_compliance requires a settled input state "
            f"(endpoint speed {max_endpoint_speed(compiled, state):.3g} m/s)"
        )
    f = np.asarray(force, dtype=np.float64)
    ee_before = end_effector_position(compiled, state)
    if float(np.linalg.norm(f)) == 0.0:
        return ProbeResult(tuple(f), np.zeros(3), 0.0, True, True)

    rod, sgn = compiled.end_effector_anchor()
    probe = _ProbeSpec(rod=rod, sgn=sgn, force=f)
    loaded = state.copy()
    hold = _settle_hold_steps(cfg.dt)
    budget = max(int(math.ceil(timeout / cfg.dt)), hold)
    from . import kernels

    _ramp_force(compiled, loaded, cfg, probe, 0.0, 1.0, ramp_time)
    _, status = advance_state(
        compiled, loaded, cfg, budget, probe=probe, speed_tol=tolerance, settle_hold=hold
    )
    probe_settled = status == kernels.STATUS_SETTLED
    displacement = end_effector_position(compiled, loaded) - ee_before

    released = loaded.copy()
    _ramp_force(compiled, released, cfg, probe, 1.0, 0.0, ramp_time)
    released, release_settled = settle(compiled, released, cfg, tolerance, timeout)
    restoration = float(
        np.linalg.norm(end_effector_position(compiled, released) - ee_before)
    )
    if restoration > restoration_limit:
        raise RestorationError(
            f"end-effector failed to spring back: {restoration * 1e3:.3f} mm "
            f"from the pre-probe position (limit {restoration_limit * 1e3:.3f} mm)"
        )
    return ProbeResult(tuple(f), displacement, restoration, probe_settled, release_settled)


# -- CSV export / import -----------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def csv_header(record: TelemetryRecord) -> list[str]:
    cols = ["time", "ee_x", "ee_y", "ee_z", "pitch", "yaw"]
    for name in record.cable_names:
        cols += [f"len_{name}", f"rest_{name}", f"ten_{name}"]
    cols.append("energy")
    return cols


def format_csv(record: TelemetryRecord) -> str:
    """Render the record as RFC 4180 text (CRLF line endings)."""
    if record.n_samples == 0:
        raise ValueError("telemetry record is empty")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(csv_header(record))
    for i in range(record.n_samples):
        row = [
            _fmt(record.times[i]),
            _fmt(record.ee[i, 0]),
            _fmt(record.ee[i, 1]),
            _fmt(record.ee[i, 2]),
            _fmt(record.pitch[i]),
            _fmt(record.yaw[i]),
        ]
        for j in range(len(record.cable_names)):
            row += [
                _fmt(record.lengths[i, j]),
                _fmt(record.rests[i, j]),
                _fmt(record.tensions[i, j]),
            ]
        row.append(_fmt(record.energy[i]))
        writer.writerow(row)
    return buf.getvalue()


def export_csv(record: TelemetryRecord, path) -> None:
    """Write the record to ``path``; byte-deterministic for identical records."""
    text = format_csv(record)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def parse_csv(path) -> TelemetryRecord:
    """Read a telemetry CSV back into a record (data columns only)."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, row)) for row in reader if row]
    if not rows:
        raise ValueError(f"telemetry CSV {path} has no data rows")
    expected_prefix = ["time", "ee_x", "ee_y", "ee_z", "pitch", "yaw"]
    if header[: len(expected_prefix)] != expected_prefix or header[-1] != "energy":
        raise ValueError(f"unrecognized telemetry CSV header in {path}")
    cable_cols = header[len(expected_prefix):-1]
    if len(cable_cols) % 3 != 0:
        raise ValueError(f"malformed cable columns in {path}")
    names = tuple(c[len("len_"):] for c in cable_cols[::3])
    data = np.array(rows)
    nc = len(names)
    lengths = data[:, 6 : 6 + 3 * nc : 3] if nc else np.zeros((len(rows), 0))
    rests = data[:, 7 : 7 + 3 * nc : 3] if nc else np.zeros((len(rows), 0))
    tensions = data[:, 8 : 8 + 3 * nc : 3] if nc else np.zeros((len(rows), 0))
    return TelemetryRecord(
        cable_names=names,
        times=data[:, 0],
        ee=data[:, 1:4],
        pitch=data[:, 4],
        yaw=data[:, 5],
        lengths=lengths,
        rests=rests,
        tensions=tensions,
        energy=data[:, -1],
    )


# -- summaries ---------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    samples: int
    duration: float
    pitch_range: float
    yaw_range: float
    max_tension: dict
    energy_drift: float
    min_rod_clearance: float | None

    def as_dict(self) -> dict:
        return {
            "samples": self.samples,
            "duration": self.duration,
            "pitch_range_rad": self.pitch_range,
            "yaw_range_rad": self.yaw_range,
            "max_tension_n": self.max_tension,
            "energy_drift_j": self.energy_drift,
            "min_rod_clearance_m": self.min_rod_clearance,
        }


def min_rod_clearance(record: TelemetryRecord) -> float | None:
    """Smallest surface-to-surface rod distance over all logged samples."""
    if record.rod_points is None or record.rod_radii is None:
        return None
    pts = record.rod_points
    radii = record.rod_radii
    n = pts.shape[1]
    if n < 2:
        return None
    best = math.inf
    for s in range(pts.shape[0]):
        for i in range(n):
            for j in range(i + 1, n):
                d = segment_distance(pts[s, i, 0], pts[s, i, 1], pts[s, j, 0], pts[s, j, 1])
                best = min(best, d - (radii[i] + radii[j]))
    return best


def summarize(record: TelemetryRecord) -> RunSummary:
    """Scalar run summary used by the acceptance suite."""
    if record.n_samples == 0:
        raise ValueError("telemetry record is empty")
    max_tension = {
        name: float(record.tensions[:, j].max())
        for j, name in enumerate(record.cable_names)
    }
    return RunSummary(
        samples=record.n_samples,
        duration=float(record.times[-1] - record.times[0]),
        pitch_range=float(record.pitch.max() - record.pitch.min()),
        yaw_range=float(record.yaw.max() - record.yaw.min()),
        max_tension=max_tension,
        energy_drift=float(record.energy[-1] - record.energy[0]),
        min_rod_clearance=min_rod_clearance(record),
    )


# -- presentation-only SVG plots ---------------------------------------------


def _svg_polyline(xs, ys, width, height, pad=40.0):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    sx = (width - 2 * pad) / (x1 - x0 if x1 > x0 else 1.0)
    sy = (height - 2 * pad) / (y1 - y0 if y1 > y0 else 1.0)
    pts = " ".join(
        f"{pad + (x - x0) * sx:.2f},{height - pad - (y - y0) * sy:.2f}"
        for x, y in zip(xs, ys)
    )
    return f'<polyline fill="none" stroke="currentColor" stroke-width="1.5" points="{pts}"/>'


def export_svg_plots(record: TelemetryRecord, path) -> None:
    """Write a small SVG with end-effector path and pitch/yaw traces."""
    w, h = 640, 360
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h * 2}">',
        f'<g color="#205080">{_svg_polyline(record.ee[:, 0], record.ee[:, 2], w, h)}</g>',
        f'<g transform="translate(0,{h})" color="#803020">'
        f"{_svg_polyline(record.times, record.pitch, w, h)}</g>",
        f'<g transform="translate(0,{h})" color="#208040">'
        f"{_svg_polyline(record.times, record.yaw, w, h)}</g>",
        "</svg>",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
