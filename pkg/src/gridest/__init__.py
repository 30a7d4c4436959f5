"""gridest: power-grid parameter and state estimation toolkit.

Builds per-unit grid models, solves AC power flow, generates synthetic
operating-point datasets, reduces networks onto observed buses, and trains
two estimators of nodal power injections from voltage measurements: a
physics-embedded model with learnable line/shunt parameters plus a
graph-masked neural correction, and a plain fully-connected baseline.
"""

from ._accel import backend_name
from .grid_model import (
    AdmittanceMatrix,
    Bus,
    BusKind,
    Generator,
    GridCase,
    Line,
    assemble_admittance,
    export_grid,
    line_admittance,
    load_grid,
)
from .kron import ObservabilityMask, ReducedModel, extract_reduced_graph, kron_reduce
from .matpower import import_matpower
from .powerflow import (
    PFSolveOptions,
    PowerState,
    VoltageState,
    dispatch,
    inverse_pf,
    solve_pf,
)

__version__ = "0.1.0"

__all__ = [
    "AdmittanceMatrix",
    "Bus",
    "BusKind",
    "Generator",
    "GridCase",
    "Line",
    "ObservabilityMask",
    "PFSolveOptions",
    "PowerState",
    "ReducedModel",
    "VoltageState",
    "assemble_admittance",
    "backend_name",
    "dispatch",
    "export_grid",
    "extract_reduced_graph",
    "import_matpower",
    "inverse_pf",
    "kron_reduce",
    "line_admittance",
    "load_grid",
    "solve_pf",
    "__version__",
]
