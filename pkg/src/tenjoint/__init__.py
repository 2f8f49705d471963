"""tenjoint: deterministic rigid-rod / cable-network tensegrity dynamics.

Declare structures from Cartesian rod and cable coordinates, simulate them
under gravity with tension-only spring-damper cables, drive active cables
through motor-limited antagonistic pairs, and log end-effector telemetry.
"""

from .actuation import (
    ActuationError,
    MotorState,
    apply_antagonistic,
    apply_cocontraction,
    filter_command,
)
from .controllers import (
    NullPolicy,
    PeriodicPairPolicy,
    PolicyInput,
    PolicyOutput,
    ScriptPolicy,
    periodic_pair_policy,
    run_policy,
    script_policy,
)
from .dynamics import (
    DegenerateCableError,
    DivergenceError,
    SimConfig,
    SimulationFault,
    cable_force,
    compile_structure,
    step,
    total_energy,
)
from .elbow import (
    ElbowParams,
    JointAngles,
    build_elbow,
    measure_angles,
    tag_elbow,
    with_angle_reference,
)
from .kernels import BACKEND
from .model import SimState, initial_state
from .structure import (
    Anchor,
    CablePair,
    CableSpec,
    RodSpec,
    Structure,
    StructureError,
    ValidationReport,
    validate,
)
from .telemetry import (
    ProbeResult,
    TelemetryRecord,
    export_csv,
    parse_csv,
    probe_compliance,
    settle,
    summarize,
)
from .tsg import TsgParseError, format_tsg, load_tsg, parse_tsg, save_tsg

__version__ = "0.1.0"
