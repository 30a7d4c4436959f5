"""Exact network reduction onto an observed bus set.

Eliminating the unobserved buses from Ohm's law I = Y V by block elimination
gives an equivalent admittance matrix over the observed buses (the Schur
complement), plus a correction to the observed currents carrying the effect
of unobserved injections. The reduced off-diagonals define an effective graph
once entries below a relative threshold are discarded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grid_model import AdmittanceMatrix, BusKind, GridCase, ValidationError
from .powerflow import VoltageState

# Condition-number ceiling above which the interior block is treated as
# numerically singular.
COND_LIMIT = 1e12


class SingularInteriorBlock(Exception):
    """The unobserved-bus block of the admittance matrix is not invertible."""


@dataclass(frozen=True)
class ObservabilityMask:
    """Sorted set of observed bus ids; the complement is unobserved."""

    observed: tuple[int, ...]

    def __post_init__(self):
        obs = tuple(sorted(self.observed))
        if not obs:
            raise ValidationError("observability mask must not be empty")
        if len(set(obs)) != len(obs):
            raise ValidationError("observability mask has duplicate bus ids")
        if obs[0] < 0:
            raise ValidationError("bus ids must be non-negative")
        object.__setattr__(self, "observed", obs)

    def validate_for(self, n: int) -> None:
        if self.observed[-1] >= n:
            raise ValidationError(f"mask references bus {self.observed[-1]} of {n}")

    def unobserved(self, n: int) -> tuple[int, ...]:
        obs = set(self.observed)
        return tuple(i for i in range(n) if i not in obs)

    @staticmethod
    def generators(grid: GridCase) -> "ObservabilityMask":
        return ObservabilityMask(observed=grid.generator_buses())

    @staticmethod
    def full(n: int) -> "ObservabilityMask":
        return ObservabilityMask(observed=tuple(range(n)))


def _blocks(y: AdmittanceMatrix, mask: ObservabilityMask):
    mask.validate_for(y.n)
    obs = list(mask.observed)
    unobs = list(mask.unobserved(y.n))
    m = y.entries
    return (
        m[np.ix_(obs, obs)],
        m[np.ix_(obs, unobs)],
        m[np.ix_(unobs, obs)],
        m[np.ix_(unobs, unobs)],
        obs,
        unobs,
    )


def kron_reduce(y: AdmittanceMatrix, mask: ObservabilityMask) -> AdmittanceMatrix:
    """Schur complement of the admittance matrix onto the observed buses."""
    yoo, you, yuo, yuu, _, unobs = _blocks(y, mask)
    if not unobs:
        return AdmittanceMatrix(y.entries.copy())
    if np.linalg.cond(yuu) > COND_LIMIT:
        raise SingularInteriorBlock(
            f"unobserved block is numerically singular ({len(unobs)} buses)"
        )
    reduced = yoo - you @ np.linalg.solve(yuu, yuo)
    reduced = 0.5 * (reduced + reduced.T)  # remove elimination roundoff
    return AdmittanceMatrix(reduced)


def effective_injections(
    y: AdmittanceMatrix,
    state: VoltageState,
    currents: np.ndarray,
    mask: ObservabilityMask,
):
    """Split observed complex powers into reduced-network and unobserved terms.

    Returns (s_reduced, s_unobserved) with
      s_reduced    = V_o * conj(Y_reduced V_o)
      s_unobserved = V_o * conj(Y_ou Y_uu^{-1} I_u)
    whose sum equals the measured V_o * conj(I_o) when I = Y V.
    """
    currents = np.asarray(currents, dtype=complex)
    if currents.shape != (y.n,):
        raise ValidationError("currents must be a full-length complex vector")
    _, you, _, yuu, obs, unobs = _blocks(y, mask)
    volt = state.phasors()
    v_o = volt[obs]
    y_red = kron_reduce(y, mask).entries
    s_reduced = v_o * np.conj(y_red @ v_o)
    if unobs:
        s_unobs = v_o * np.conj(you @ np.linalg.solve(yuu, currents[unobs]))
    else:
        s_unobs = np.zeros_like(v_o)
    return s_reduced, s_unobs


@dataclass(frozen=True)
class ReducedModel:
    """Reduced admittance matrix plus its above-threshold effective graph.

    edges index into the observed ordering (positions 0..m-1, ascending bus
    id); observed maps positions back to original bus ids.
    """

    observed: tuple[int, ...]
    y_reduced: AdmittanceMatrix
    edges: tuple[tuple[int, int], ...]
    threshold_rel: float
    n_components: int

    @property
    def n(self) -> int:
        return len(self.observed)

    def edge_admittances(self) -> np.ndarray:
        """Series admittance y_ij = -Y_reduced[i, j] per effective edge."""
        m = self.y_reduced.entries
        return np.array([-m[i, j] for i, j in self.edges])

    def edges_as_bus_ids(self) -> tuple[tuple[int, int], ...]:
        return tuple((self.observed[i], self.observed[j]) for i, j in self.edges)


def extract_reduced_graph(
    y_reduced: AdmittanceMatrix,
    threshold_rel: float,
    observed: tuple[int, ...] | None = None,
) -> ReducedModel:
    """Keep the off-diagonals with magnitude >= threshold_rel * largest one."""
    if not 0.0 < threshold_rel < 1.0:
        raise ValidationError("threshold_rel must lie in (0, 1)")
    m = y_reduced.entries
    nm = m.shape[0]
    observed = tuple(range(nm)) if observed is None else tuple(observed)
    if len(observed) != nm:
        raise ValidationError("observed ids must match the reduced matrix size")

    off = np.abs(m - np.diag(np.diag(m)))
    cutoff = threshold_rel * off.max() if nm > 1 else 0.0
    edges = tuple(
        (i, j) for i in range(nm) for j in range(i + 1, nm) if off[i, j] >= cutoff and off[i, j] > 0
    )

    parent = list(range(nm))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    components = len({find(i) for i in range(nm)})

    return ReducedModel(
        observed=observed,
        y_reduced=y_reduced,
        edges=edges,
        threshold_rel=threshold_rel,
        n_components=components,
    )


def reduce_case(
    grid: GridCase, mask: ObservabilityMask, threshold_rel: float = 0.02
) -> ReducedModel:
    """Assemble, reduce, and extract the effective graph for a grid case."""
    from .grid_model import assemble_admittance

    y_red = kron_reduce(assemble_admittance(grid), mask)
    return extract_reduced_graph(y_red, threshold_rel, observed=mask.observed)


# --- reduced-model export (native schema with a reduced marker) -------------


def export_reduced(model: ReducedModel, grid: GridCase | None = None) -> str:
    """Serialize a reduced model in the native grid schema.

    Only above-threshold edges become lines; each bus keeps the remainder of
    its reduced self-admittance as a shunt. Bus kinds are copied from the
    source grid when given, else every bus is marked "pq".
    """
    m = model.y_reduced.entries
    shunts = np.diag(m).copy()
    lines = []
    for (i, j), y_e in zip(model.edges, model.edge_admittances()):
        z = 1.0 / y_e
        lines.append(
            {"from": i, "to": j, "r": float(z.real), "x": float(z.imag), "y_sh": 0.0}
        )
        shunts[i] -= y_e
        shunts[j] -= y_e
    buses = []
    for pos, bus_id in enumerate(model.observed):
        kind = "pq"
        if grid is not None:
            kind = grid.buses[bus_id].kind.value
        buses.append(
            {
                "id": pos,
                "orig_id": bus_id,
                "kind": kind,
                "shunt_g": float(shunts[pos].real),
                "shunt_b": float(shunts[pos].imag),
                "base_load_p": 0.0,
                "base_load_q": 0.0,
            }
        )
    doc = {
        "schema_version": 1,
        "reduced": True,
        "threshold_rel": model.threshold_rel,
        "n_components": model.n_components,
        "base_mva": grid.base_mva if grid is not None else 100.0,
        "buses": buses,
        "lines": lines,
        "generators": [],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def load_reduced(text: str) -> ReducedModel:
    """Rebuild a (thresholded) ReducedModel from its native-schema export."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not doc.get("reduced"):
        raise ValidationError("not a reduced-model file (missing reduced marker)")
    buses = doc["buses"]
    nm = len(buses)
    y = np.zeros((nm, nm), dtype=complex)
    edges = []
    for row in doc["lines"]:
        i, j = row["from"], row["to"]
        zz = row["r"] ** 2 + row["x"] ** 2
        y_e = complex(row["r"] / zz, -row["x"] / zz)
        y[i, j] -= y_e
        y[j, i] -= y_e
        y[i, i] += y_e
        y[j, j] += y_e
        edges.append((i, j))
    for pos, row in enumerate(buses):
        y[pos, pos] += complex(row["shunt_g"], row["shunt_b"])
    observed = tuple(int(row.get("orig_id", row["id"])) for row in buses)
    return ReducedModel(
        observed=observed,
        y_reduced=AdmittanceMatrix(y),
        edges=tuple(edges),
        threshold_rel=float(doc.get("threshold_rel", 0.0)),
        n_components=int(doc.get("n_components", 1)),
    )
