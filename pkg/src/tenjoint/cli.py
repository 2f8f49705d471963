"""Command-line entry point: validate, run, probe, emit-elbow.

Exit codes: 0 success, 1 validation or physics failure, 2 usage/file
errors.  All outputs are deterministic; data files never contain
timestamps.  ``TENJOINT_OUT`` sets the default output directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .controllers import (
    NullPolicy,
    PeriodicPairPolicy,
    Policy,
    load_schedule_csv,
    run_policy,
)
from .dynamics import SimConfig, SimulationFault, compile_structure
from .elbow import ElbowParams, build_elbow, looks_like_elbow, tag_elbow, with_angle_reference
from .model import initial_state
from .structure import Structure, StructureError, validate
from .telemetry import (
    ProbeResult,
    export_csv,
    probe_compliance,
    settle,
    summarize,
)
from .tsg import TsgParseError, load_tsg, save_tsg

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce one simulation run.

    The simulator is seedless by construction (fully deterministic); the
    field records that intent for downstream tooling.
    """

    structure_path: str
    policy_spec: str
    dt: float
    duration: float
    gravity: tuple[float, float, float]
    out_dir: str
    seedless: bool = True

    def __post_init__(self):
        if not os.path.exists(self.structure_path):
            raise FileNotFoundError(self.structure_path)
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.duration > 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")


def parse_policy(spec: str) -> Policy:
    """Parse the policy mini-language: ``none``, ``name:key=value,...``, ``script:<path>``."""
    name, _, argstr = spec.partition(":")
    name = name.strip()
    if name in ("none", "null", "hold"):
        return NullPolicy()
    if name == "script":
        if not argstr:
            raise ValueError("script policy needs a CSV path: script:<path>")
        return load_schedule_csv(argstr)
    params = {}
    if argstr:
        for item in argstr.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"bad policy parameter {item!r} (expected key=value)")
            params[key.strip()] = value.strip()
    known = {"amp", "amplitude", "period"}
    unknown = set(params) - known
    if unknown:
        raise ValueError(f"unknown policy parameter(s): {sorted(unknown)}")
    amplitude = float(params.get("amp", params.get("amplitude", 0.02)))
    period = float(params.get("period", 4.0))
    return PeriodicPairPolicy(name, amplitude, period)


def _load_structure(path: str) -> Structure:
    structure = load_tsg(path)
    if looks_like_elbow(structure):
        structure = tag_elbow(structure)
    return structure


def _default_out_dir(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    env = os.environ.get("TENJOINT_OUT")
    return Path(env) if env else Path.cwd()


def cmd_validate(args) -> int:
    try:
        structure = load_tsg(args.structure)
    except TsgParseError as exc:
        print(f"parse error: {args.structure}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = validate(structure)
    if report.ok:
        print(f"{args.structure}: pass ({len(structure.rods)} rods, "
              f"{len(structure.cables)} cables, {len(structure.pairs)} pairs)")
        return EXIT_OK
    print(f"{args.structure}: {len(report.violations)} violation(s)", file=sys.stderr)
    for v in report.violations:
        print(f"  {v}", file=sys.stderr)
    return EXIT_FAILURE


def cmd_run(args) -> int:
    manifest = RunManifest(
        structure_path=args.structure,
        policy_spec=args.policy,
        dt=args.dt,
        duration=args.duration,
        gravity=tuple(args.gravity),
        out_dir=str(_default_out_dir(args.out)),
    )
    structure = _load_structure(manifest.structure_path)
    report = validate(structure)
    if not report.ok:
        print(f"invalid structure:\n{report}", file=sys.stderr)
        return EXIT_FAILURE
    policy = parse_policy(manifest.policy_spec)
    config = SimConfig(dt=manifest.dt, gravity=manifest.gravity, duration=manifest.duration)

    compiled = compile_structure(structure)
    state, settled = settle(compiled, initial_state(compiled), SimConfig(dt=manifest.dt, gravity=manifest.gravity))
    if not settled:
        print("warning: structure did not settle before the run", file=sys.stderr)
    if structure.elbow is not None:
        structure = with_angle_reference(structure, state)

    record = run_policy(structure, state, policy, config)
    out_dir = Path(manifest.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "telemetry.csv"
    export_csv(record, csv_path)
    summary = summarize(record).as_dict()
    summary["csv"] = str(csv_path)
    summary["policy"] = record.metadata.get("policy")
    summary["structure_hash"] = record.metadata.get("structure_hash")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_probe(args) -> int:
    structure = _load_structure(args.structure)
    report = validate(structure)
    if not report.ok:
        print(f"invalid structure:\n{report}", file=sys.stderr)
        return EXIT_FAILURE
    config = SimConfig(dt=args.dt, gravity=tuple(args.gravity))
    compiled = compile_structure(structure)
    state, settled = settle(compiled, initial_state(compiled), config)
    if not settled:
        print("structure did not settle; cannot probe", file=sys.stderr)
        return EXIT_FAILURE
    result = probe_compliance(compiled, state, np.asarray(args.force), config)
    out = {
        "force_n": list(result.force),
        "displacement_m": [float(v) for v in result.displacement],
        "displacement_norm_m": float(np.linalg.norm(result.displacement)),
        "restoration_m": result.restoration_distance,
    }
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_emit_elbow(args) -> int:
    overrides = {}
    for f in fields(ElbowParams):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    params = ElbowParams(**overrides)
    structure = build_elbow(params)
    save_tsg(structure, args.out)
    print(f"wrote {args.out} ({len(structure.rods)} rods, {len(structure.cables)} cables)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tenjoint",
        description="Deterministic tensegrity-joint simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a .tsg structure file")
    p.add_argument("structure")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="settle, run a policy, export telemetry CSV")
    p.add_argument("--structure", required=True)
    p.add_argument("--policy", default="none",
                   help="none | <pair>:amp=<m>,period=<s> | script:<csv>")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--gravity", type=float, nargs=3, default=[0.0, 0.0, -9.81],
                   metavar=("GX", "GY", "GZ"))
    p.add_argument("--out", default=None, help="output directory (default: $TENJOINT_OUT or cwd)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("probe", help="settle, apply an end-effector force, report compliance")
    p.add_argument("structure")
    p.add_argument("--force", type=float, nargs=3, required=True, metavar=("FX", "FY", "FZ"))
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--gravity", type=float, nargs=3, default=[0.0, 0.0, -9.81],
                   metavar=("GX", "GY", "GZ"))
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("emit-elbow", help="write the reference elbow as a .tsg file")
    p.add_argument("--out", required=True)
    for f in fields(ElbowParams):
        if f.name in ("mirror", "mount_rotation", "mount_translation"):
            continue
        flag = "--" + f.name.replace("_", "-")
        p.add_argument(flag, type=float, default=None, dest=f.name)
    p.add_argument("--mirror", action="store_const", const=True, default=None, dest="mirror")
    p.set_defaults(func=cmd_emit_elbow)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TsgParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, StructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ValueError) and not isinstance(exc, StructureError) else EXIT_FAILURE
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
