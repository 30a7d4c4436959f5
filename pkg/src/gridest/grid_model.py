"""Grid data model: buses, Pi-model lines, generators, admittance assembly,
and the native JSON grid format.

All electrical quantities are per-unit on the case's MVA base. Bus ids are
contiguous 0..n-1 and double as matrix row indices. Sign convention used
throughout the package: power injections into the grid are positive, loads
are negative injections.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

# Smallest accepted squared series-impedance magnitude (per unit). Below this
# a line is treated as a degenerate short rather than stamped with a huge
# admittance.
EPS_Z = 1e-8


class GridModelError(Exception):
    """Base class for grid model errors."""


class DegenerateImpedance(GridModelError):
    """Series impedance too close to zero to invert."""


class ValidationError(GridModelError):
    """A grid case or grid file violates the schema or an invariant."""


class BusKind(enum.Enum):
    SLACK = "slack"
    PV = "pv"
    PQ = "pq"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    shunt_g: float = 0.0
    shunt_b: float = 0.0
    base_load_p: float = 0.0  # consumption, positive
    base_load_q: float = 0.0


@dataclass(frozen=True)
class Line:
    """Pi-model line: series impedance r + jx, total charging susceptance
    y_sh split half per end."""

    from_bus: int
    to_bus: int
    r: float
    x: float
    y_sh: float = 0.0


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost: float = 1.0  # marginal cost, arbitrary units; only the order matters
    v_set: float = 1.0


def line_admittance(line: Line) -> complex:
    """Series admittance g + jb of a line from its impedance.

    g = r / (r^2 + x^2), b = -x / (r^2 + x^2).
    """
    zz = line.r * line.r + line.x * line.x
    if zz < EPS_Z:
        raise DegenerateImpedance(
            f"line {line.from_bus}-{line.to_bus}: r^2+x^2 = {zz:g} < {EPS_Z:g}"
        )
    return complex(line.r / zz, -line.x / zz)


@dataclass(frozen=True)
class GridCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    base_mva: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))
        _validate_case(self)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def slack_id(self) -> int:
        return next(b.id for b in self.buses if b.kind is BusKind.SLACK)

    def bus_kinds(self) -> tuple[BusKind, ...]:
        return tuple(b.kind for b in self.buses)

    def load_p(self) -> np.ndarray:
        return np.array([b.base_load_p for b in self.buses])

    def load_q(self) -> np.ndarray:
        return np.array([b.base_load_q for b in self.buses])

    def generator_buses(self) -> tuple[int, ...]:
        """Buses carrying at least one generator, ascending."""
        return tuple(sorted({g.bus for g in self.generators}))

    def content_hash(self) -> str:
        digest = hashlib.sha256(export_grid(self).encode()).hexdigest()
        return digest[:16]


def _validate_case(grid: GridCase) -> None:
    n = len(grid.buses)
    if n == 0:
        raise ValidationError("buses: empty bus list")
    for i, bus in enumerate(grid.buses):
        if bus.id != i:
            raise ValidationError(f"buses[{i}].id: expected contiguous id {i}, got {bus.id}")
        for name in ("shunt_g", "shunt_b", "base_load_p", "base_load_q"):
            if not math.isfinite(getattr(bus, name)):
                raise ValidationError(f"buses[{i}].{name}: not finite")
    slacks = [b.id for b in grid.buses if b.kind is BusKind.SLACK]
    if len(slacks) != 1:
        raise ValidationError(f"buses: expected exactly one slack bus, got {len(slacks)}")
    if not math.isfinite(grid.base_mva) or grid.base_mva <= 0:
        raise ValidationError("base_mva: must be positive and finite")

    seen_pairs = set()
    for k, line in enumerate(grid.lines):
        if not (0 <= line.from_bus < n and 0 <= line.to_bus < n):
            raise ValidationError(f"lines[{k}]: endpoint out of range")
        if line.from_bus == line.to_bus:
            raise ValidationError(f"lines[{k}]: self-loop at bus {line.from_bus}")
        pair = (min(line.from_bus, line.to_bus), max(line.from_bus, line.to_bus))
        if pair in seen_pairs:
            raise ValidationError(f"lines[{k}]: duplicate line for bus pair {pair}")
        seen_pairs.add(pair)
        if line.r * line.r + line.x * line.x < EPS_Z:
            raise ValidationError(f"lines[{k}]: degenerate impedance")
        if not math.isfinite(line.y_sh):
            raise ValidationError(f"lines[{k}].y_sh: not finite")

    for k, gen in enumerate(grid.generators):
        if not (0 <= gen.bus < n):
            raise ValidationError(f"generators[{k}].bus: out of range")
        if gen.p_min > gen.p_max:
            raise ValidationError(f"generators[{k}]: p_min > p_max")
        if gen.q_min > gen.q_max:
            raise ValidationError(f"generators[{k}]: q_min > q_max")

    if n > 1 and not _connected(n, grid.lines):
        raise ValidationError("lines: grid graph is not connected")


def _connected(n: int, lines) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for line in lines:
        adj[line.from_bus].append(line.to_bus)
        adj[line.to_bus].append(line.from_bus)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n


@dataclass(frozen=True)
class AdmittanceMatrix:
    """Dense complex bus-admittance matrix. Immutable and symmetric."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValidationError("admittance matrix must be square")
        scale = max(np.abs(arr).max(), 1.0)
        if np.abs(arr - arr.T).max() > 1e-9 * scale:
            raise ValidationError("admittance matrix must be symmetric")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def g(self) -> np.ndarray:
        return self.entries.real

    @property
    def b(self) -> np.ndarray:
        return self.entries.imag


def assemble_admittance(grid: GridCase) -> AdmittanceMatrix:
    """Stamp every line's Pi model plus bus shunts into the bus-admittance
    matrix: Y[i,j] = -y_ij off-diagonal, Y[i,i] = sum of incident series
    admittances + half line charging per end + the bus's own shunt."""
    n = grid.n_bus
    y = np.zeros((n, n), dtype=complex)
    for line in grid.lines:
        ys = line_admittance(line)
        i, j = line.from_bus, line.to_bus
        y[i, j] -= ys
        y[j, i] -= ys
        y[i, i] += ys + 0.5j * line.y_sh
        y[j, j] += ys + 0.5j * line.y_sh
    for bus in grid.buses:
        y[bus.id, bus.id] += complex(bus.shunt_g, bus.shunt_b)
    return AdmittanceMatrix(y)


# --- native JSON grid format ------------------------------------------------

_SCHEMA_VERSION = 1


def export_grid(grid: GridCase) -> str:
    """Serialize a GridCase to the native JSON schema (round-trip exact)."""
    doc = {
        "schema_version": _SCHEMA_VERSION,
        "base_mva": grid.base_mva,
        "buses": [
            {
                "id": b.id,
                "kind": b.kind.value,
                "shunt_g": b.shunt_g,
                "shunt_b": b.shunt_b,
                "base_load_p": b.base_load_p,
                "base_load_q": b.base_load_q,
            }
            for b in grid.buses
        ],
        "lines": [
            {"from": ln.from_bus, "to": ln.to_bus, "r": ln.r, "x": ln.x, "y_sh": ln.y_sh}
            for ln in grid.lines
        ],
        "generators": [
            {
                "bus": g.bus,
                "p_min": g.p_min,
                "p_max": g.p_max,
                "q_min": g.q_min,
                "q_max": g.q_max,
                "cost": g.cost,
                "v_set": g.v_set,
            }
            for g in grid.generators
        ],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def _want(obj: dict, key: str, types, path: str):
    if key not in obj:
        raise ValidationError(f"{path}.{key}: missing")
    val = obj[key]
    if types is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValidationError(f"{path}.{key}: expected number, got {type(val).__name__}")
        return float(val)
    if types is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ValidationError(f"{path}.{key}: expected integer, got {type(val).__name__}")
        return val
    if not isinstance(val, types):
        raise ValidationError(f"{path}.{key}: expected {types}, got {type(val).__name__}")
    return val


def load_grid(text: str) -> GridCase:
    """Parse the native JSON schema back into a GridCase."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("top level: expected object")
    if doc.get("reduced"):
        raise ValidationError(
            "top level: file is a reduced model; load it with kron.load_reduced"
        )
    base = _want(doc, "base_mva", float, "$")
    buses = []
    for i, row in enumerate(_want(doc, "buses", list, "$")):
        path = f"buses[{i}]"
        if not isinstance(row, dict):
            raise ValidationError(f"{path}: expected object")
        kind_s = _want(row, "kind", str, path)
        try:
            kind = BusKind(kind_s)
        except ValueError:
            raise ValidationError(f"{path}.kind: unknown bus kind {kind_s!r}") from None
        buses.append(
            Bus(
                id=_want(row, "id", int, path),
                kind=kind,
                shunt_g=_want(row, "shunt_g", float, path),
                shunt_b=_want(row, "shunt_b", float, path),
                base_load_p=_want(row, "base_load_p", float, path),
                base_load_q=_want(row, "base_load_q", float, path),
            )
        )
    lines = []
    for i, row in enumerate(_want(doc, "lines", list, "$")):
        path = f"lines[{i}]"
        if not isinstance(row, dict):
            raise ValidationError(f"{path}: expected object")
        lines.append(
            Line(
                from_bus=_want(row, "from", int, path),
                to_bus=_want(row, "to", int, path),
                r=_want(row, "r", float, path),
                x=_want(row, "x", float, path),
                y_sh=_want(row, "y_sh", float, path),
            )
        )
    gens = []
    for i, row in enumerate(_want(doc, "generators", list, "$")):
        path = f"generators[{i}]"
        if not isinstance(row, dict):
            raise ValidationError(f"{path}: expected object")
        gens.append(
            Generator(
                bus=_want(row, "bus", int, path),
                p_min=_want(row, "p_min", float, path),
                p_max=_want(row, "p_max", float, path),
                q_min=_want(row, "q_min", float, path),
                q_max=_want(row, "q_max", float, path),
                cost=_want(row, "cost", float, path),
                v_set=_want(row, "v_set", float, path),
            )
        )
    return GridCase(buses=tuple(buses), lines=tuple(lines), generators=tuple(gens), base_mva=base)
