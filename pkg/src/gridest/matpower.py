"""One-way importer for MATPOWER .m case files.

Only the numeric mpc.bus / mpc.branch / mpc.gen (and optional mpc.gencost)
matrices are read; anything beyond numeric literals inside them is rejected.
Branches with a tap ratio are folded into an equivalent symmetric Pi stamp
(series impedance scaled by the tap, end-shunt corrections moved onto the
terminal buses) so the resulting GridCase reproduces the original
bus-admittance matrix exactly. Phase-shifting branches are not supported.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .grid_model import Bus, BusKind, Generator, GridCase, Line


class ParseError(Exception):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f" (line {line}, col {col})" if line is not None else ""
        super().__init__(message + where)


class UnsupportedFeature(Exception):
    """Case uses a modeling feature outside the supported grid model."""


# MATPOWER column positions (0-based)
_BUS_I, _BUS_TYPE, _PD, _QD, _GS, _BS = 0, 1, 2, 3, 4, 5
_GEN_BUS, _PG, _QG, _QMAX, _QMIN, _VG, _MBASE, _GEN_STATUS, _PMAX, _PMIN = range(10)
_F_BUS, _T_BUS, _BR_R, _BR_X, _BR_B, _RATE_A, _RATE_B, _RATE_C, _TAP, _SHIFT, _BR_STATUS = range(11)

_NUM_RE = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eEdD][-+]?\d+)?$|[-+]?[iI]nf$")


def _strip_comments(text: str) -> str:
    out_lines = []
    for line in text.splitlines():
        cut = line.find("%")
        out_lines.append(line if cut < 0 else line[:cut])
    return "\n".join(out_lines)


def _parse_matrix(text: str, name: str) -> list[list[float]] | None:
    """Extract a numeric matrix assigned to mpc.<name>; None when absent."""
    match = re.search(rf"mpc\.{name}\s*=\s*\[", text)
    if match is None:
        return None
    start = match.end()
    end = text.find("];", start)
    if end < 0:
        raise ParseError(f"mpc.{name}: missing closing '];'")
    body = text[start:end]
    line0 = text.count("\n", 0, start)

    rows: list[list[float]] = []
    row: list[float] = []
    for lineno, line in enumerate(body.split("\n"), start=line0 + 1):
        pos = 0
        for token in re.finditer(r"[^\s;,]+|;", line):
            tok = token.group(0)
            pos = token.start() + 1
            if tok == ";":
                if row:
                    rows.append(row)
                    row = []
                continue
            if not _NUM_RE.match(tok):
                raise ParseError(
                    f"mpc.{name}: expected numeric literal, got {tok!r}", lineno, pos
                )
            row.append(float(tok.lower().replace("d", "e")))
        # newline also terminates a row
        if row:
            rows.append(row)
            row = []
    if row:
        rows.append(row)
    width = len(rows[0]) if rows else 0
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ParseError(f"mpc.{name}: row {i} has {len(r)} fields, expected {width}")
    return rows


def _parse_scalar(text: str, name: str) -> float | None:
    match = re.search(rf"mpc\.{name}\s*=\s*([^;\s]+)\s*;", text)
    if match is None:
        return None
    tok = match.group(1)
    if not _NUM_RE.match(tok):
        raise ParseError(f"mpc.{name}: expected numeric literal, got {tok!r}")
    return float(tok)


@dataclass
class _PiBranch:
    """Symmetric-series branch stamp: series admittance plus complex shunt
    admittances hung on each terminal bus."""

    ys: complex
    sh_from: complex
    sh_to: complex
    tapped: bool


def _marginal_cost(row: list[float]) -> float:
    model, ncost = int(row[0]), int(row[3])
    coeffs = row[4 : 4 + (2 * ncost if model == 1 else ncost)]
    if model == 2:
        # polynomial, highest order first; linear term is the marginal cost
        # at zero output (constant term carries no signal for dispatch order)
        if ncost >= 2:
            return coeffs[-2]
        return 0.0
    if model == 1:
        # piecewise linear (x0,y0,x1,y1,...): average slope
        xs, ys = coeffs[0::2], coeffs[1::2]
        if len(xs) >= 2 and xs[-1] != xs[0]:
            return (ys[-1] - ys[0]) / (xs[-1] - xs[0])
        return 0.0
    raise ParseError(f"mpc.gencost: unknown cost model {model}")


def import_matpower(text: str) -> GridCase:
    """Parse MATPOWER case text into a per-unit GridCase."""
    text = _strip_comments(text)
    base = _parse_scalar(text, "baseMVA")
    if base is None or base <= 0:
        raise ParseError("mpc.baseMVA: missing or non-positive")

    bus_rows = _parse_matrix(text, "bus")
    branch_rows = _parse_matrix(text, "branch")
    gen_rows = _parse_matrix(text, "gen")
    cost_rows = _parse_matrix(text, "gencost")
    if bus_rows is None:
        raise ParseError("mpc.bus: matrix not found")
    if branch_rows is None:
        raise ParseError("mpc.branch: matrix not found")
    if gen_rows is None:
        raise ParseError("mpc.gen: matrix not found")
    if cost_rows is not None and len(cost_rows) != len(gen_rows):
        raise ParseError(
            f"mpc.gencost: {len(cost_rows)} rows for {len(gen_rows)} generators"
        )

    index_of: dict[int, int] = {}
    kinds: list[BusKind] = []
    shunt: list[complex] = []
    loads: list[tuple[float, float]] = []
    for row in bus_rows:
        ext_id = int(row[_BUS_I])
        if ext_id in index_of:
            raise ParseError(f"mpc.bus: duplicate bus number {ext_id}")
        bus_type = int(row[_BUS_TYPE])
        if bus_type == 4:
            raise UnsupportedFeature(f"bus {ext_id}: isolated buses (type 4) not supported")
        if bus_type not in (1, 2, 3):
            raise ParseError(f"mpc.bus: unknown bus type {bus_type} at bus {ext_id}")
        index_of[ext_id] = len(kinds)
        kinds.append({3: BusKind.SLACK, 2: BusKind.PV, 1: BusKind.PQ}[bus_type])
        loads.append((row[_PD] / base, row[_QD] / base))
        shunt.append(complex(row[_GS] / base, row[_BS] / base))

    # generators (in-service only)
    gens: list[Generator] = []
    for i, row in enumerate(gen_rows):
        if len(row) <= _PMIN:
            raise ParseError(f"mpc.gen: row {i} too short")
        if int(row[_GEN_STATUS]) == 0:
            continue
        ext_bus = int(row[_GEN_BUS])
        if ext_bus not in index_of:
            raise ParseError(f"mpc.gen: unknown bus {ext_bus} in row {i}")
        vg = row[_VG]
        gens.append(
            Generator(
                bus=index_of[ext_bus],
                p_min=row[_PMIN] / base,
                p_max=row[_PMAX] / base,
                q_min=row[_QMIN] / base,
                q_max=row[_QMAX] / base,
                cost=_marginal_cost(cost_rows[i]) if cost_rows is not None else 1.0,
                v_set=vg if vg > 0 else 1.0,
            )
        )

    # branches: tap folding, then merge per unordered bus pair
    merged: dict[tuple[int, int], _PiBranch] = {}
    order: list[tuple[int, int]] = []
    for i, row in enumerate(branch_rows):
        if len(row) <= _BR_STATUS:
            raise ParseError(f"mpc.branch: row {i} too short")
        if int(row[_BR_STATUS]) == 0:
            continue
        for ext in (int(row[_F_BUS]), int(row[_T_BUS])):
            if ext not in index_of:
                raise ParseError(f"mpc.branch: unknown bus {ext} in row {i}")
        f, t = index_of[int(row[_F_BUS])], index_of[int(row[_T_BUS])]
        if f == t:
            raise ParseError(f"mpc.branch: row {i} is a self-loop")
        if row[_SHIFT] != 0.0:
            raise UnsupportedFeature(
                f"branch {int(row[_F_BUS])}-{int(row[_T_BUS])}: phase-shift angle not supported"
            )
        r, x, b_ch = row[_BR_R], row[_BR_X], row[_BR_B]
        if r * r + x * x == 0.0:
            raise ParseError(f"mpc.branch: row {i} has zero impedance")
        tap = row[_TAP] if row[_TAP] != 0.0 else 1.0
        if tap <= 0:
            raise UnsupportedFeature(f"mpc.branch: row {i} has non-positive tap ratio")
        y = 1.0 / complex(r, x)
        if tap == 1.0:
            pib = _PiBranch(ys=y, sh_from=0.5j * b_ch, sh_to=0.5j * b_ch, tapped=False)
        else:
            ys = y / tap
            pib = _PiBranch(
                ys=ys,
                sh_from=(y + 0.5j * b_ch) / (tap * tap) - ys,
                sh_to=(y + 0.5j * b_ch) - ys,
                tapped=True,
            )
        key = (min(f, t), max(f, t))
        if f > t:
            pib = _PiBranch(pib.ys, pib.sh_to, pib.sh_from, pib.tapped)
        if key in merged:
            prev = merged[key]
            merged[key] = _PiBranch(
                prev.ys + pib.ys,
                prev.sh_from + pib.sh_from,
                prev.sh_to + pib.sh_to,
                prev.tapped or pib.tapped,
            )
        else:
            merged[key] = pib
            order.append(key)

    lines: list[Line] = []
    for key in order:
        f, t = key
        pib = merged[key]
        z = 1.0 / pib.ys
        if pib.tapped or abs(pib.sh_from - pib.sh_to) > 0.0 or pib.sh_from.real != 0.0:
            # asymmetric or complex end shunts cannot ride on the line model;
            # push them onto the terminal buses (admittance matrix unchanged)
            shunt[f] += pib.sh_from
            shunt[t] += pib.sh_to
            y_sh = 0.0
        else:
            y_sh = 2.0 * pib.sh_from.imag
        lines.append(Line(from_bus=f, to_bus=t, r=z.real, x=z.imag, y_sh=y_sh))

    gen_bus_set = {g.bus for g in gens}
    buses: list[Bus] = []
    for i, kind in enumerate(kinds):
        if kind is BusKind.PV and i not in gen_bus_set:
            kind = BusKind.PQ  # voltage cannot be held without a generator
        buses.append(
            Bus(
                id=i,
                kind=kind,
                shunt_g=shunt[i].real,
                shunt_b=shunt[i].imag,
                base_load_p=loads[i][0],
                base_load_q=loads[i][1],
            )
        )

    return GridCase(
        buses=tuple(buses), lines=tuple(lines), generators=tuple(gens), base_mva=base
    )
