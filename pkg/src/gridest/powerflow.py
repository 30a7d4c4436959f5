"""AC power flow and generator dispatch.

Provides the explicit voltage-to-power map (nodal injections from a voltage
state under a given admittance matrix), its inverse via Newton-Raphson on the
slack/PV/PQ formulation with reactive-limit handling, and a merit-order
dispatch that sets generator operating points for a load pattern.

Injections are positive into the grid; loads enter as negative injections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .grid_model import AdmittanceMatrix, BusKind, GridCase


class PowerFlowError(Exception):
    """Base class for power-flow errors."""


class DimensionMismatch(PowerFlowError):
    pass


class NonConvergence(PowerFlowError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"power flow did not converge in {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class SingularJacobian(PowerFlowError):
    pass


class InfeasibleDispatch(PowerFlowError):
    pass


def _frozen_vector(arr, name: str) -> np.ndarray:
    out = np.array(arr, dtype=float)
    if out.ndim != 1:
        raise DimensionMismatch(f"{name} must be a 1-d vector")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class VoltageState:
    """Per-unit voltage magnitudes and phase angles (radians) for all buses."""

    v: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        v = _frozen_vector(self.v, "v")
        theta = _frozen_vector(self.theta, "theta")
        if v.shape != theta.shape:
            raise DimensionMismatch("v and theta must have equal length")
        if not np.all(v > 0):
            raise PowerFlowError("voltage magnitudes must be positive")
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(theta)):
            raise PowerFlowError("voltage state must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.v.shape[0]

    def phasors(self) -> np.ndarray:
        return self.v * np.exp(1j * self.theta)


@dataclass(frozen=True)
class PowerState:
    """Per-unit nodal active/reactive injections."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = _frozen_vector(self.p, "p")
        q = _frozen_vector(self.q, "q")
        if p.shape != q.shape:
            raise DimensionMismatch("p and q must have equal length")
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(q)):
            raise PowerFlowError("power state must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True)
class PFSolveOptions:
    tol: float = 1e-8
    max_iter: int = 30
    flat_start: bool = True
    enforce_q_limits: bool = True
    max_switch_rounds: int = 8

    def __post_init__(self):
        if self.tol <= 0:
            raise PowerFlowError("tol must be positive")
        if self.max_iter < 1:
            raise PowerFlowError("max_iter must be at least 1")


def inverse_pf(y: AdmittanceMatrix, state: VoltageState) -> PowerState:
    """Evaluate nodal injections implied by a voltage state.

    p_i = v_i sum_j v_j (G_ij cos(th_i - th_j) + B_ij sin(th_i - th_j)),
    q_i = v_i sum_j v_j (G_ij sin(th_i - th_j) - B_ij cos(th_i - th_j)),
    summed over all buses j (the bus-admittance form, shunts included).
    """
    if state.n != y.n:
        raise DimensionMismatch(f"state has {state.n} buses, matrix has {y.n}")
    p, q = _accel.injections_dense(y.g, y.b, state.v[None, :], state.theta[None, :])
    return PowerState(p=p[0], q=q[0])


def inverse_pf_batch(y: AdmittanceMatrix, v: np.ndarray, theta: np.ndarray):
    """Batched form of inverse_pf over (B, n) magnitude/angle arrays."""
    v = np.asarray(v, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if v.ndim != 2 or v.shape != theta.shape or v.shape[1] != y.n:
        raise DimensionMismatch("expected matching (B, n) arrays")
    return _accel.injections_dense(y.g, y.b, v, theta)


def jacobian_polar(y: AdmittanceMatrix, state: VoltageState):
    """Derivatives of nodal injections w.r.t. angles and magnitudes.

    Returns (p, q, dp_dth, dp_dv, dq_dth, dq_dv).
    """
    if state.n != y.n:
        raise DimensionMismatch(f"state has {state.n} buses, matrix has {y.n}")
    return _accel.polar_jacobian(y.g, y.b, state.v, state.theta)


@dataclass(frozen=True)
class InjectionSpec:
    """Bus-level constraints for one power-flow solve.

    kinds are the effective roles for this solve (a PV bus whose generators
    are all out of the pool is specified as PQ). q_low/q_high are net
    reactive-injection limits used for PV->PQ switching (+-inf disables).
    """

    kinds: tuple[BusKind, ...]
    p: np.ndarray
    q: np.ndarray
    v: np.ndarray
    q_low: np.ndarray
    q_high: np.ndarray

    @property
    def n(self) -> int:
        return len(self.kinds)


@dataclass(frozen=True)
class PFSolution:
    state: VoltageState
    iterations: int
    residual: float
    switched: tuple[int, ...] = ()

    @property
    def v(self) -> np.ndarray:
        return self.state.v

    @property
    def theta(self) -> np.ndarray:
        return self.state.theta


def _newton(gmat, bmat, kinds, p_spec, q_spec, v0, th0, tol, max_iter):
    n = len(kinds)
    pvpq = [i for i in range(n) if kinds[i] is not BusKind.SLACK]
    pq = [i for i in range(n) if kinds[i] is BusKind.PQ]
    v = v0.copy()
    th = th0.copy()
    npv = len(pvpq)

    iters = 0
    while True:
        p, q, dp_dth, dp_dv, dq_dth, dq_dv = _accel.polar_jacobian(gmat, bmat, v, th)
        mis = np.concatenate([p_spec[pvpq] - p[pvpq], q_spec[pq] - q[pq]])
        residual = float(np.abs(mis).max()) if mis.size else 0.0
        if residual <= tol:
            return v, th, iters, residual
        if iters >= max_iter or not math.isfinite(residual):
            raise NonConvergence(iters, residual)
        jac = np.block(
            [
                [dp_dth[np.ix_(pvpq, pvpq)], dp_dv[np.ix_(pvpq, pq)]],
                [dq_dth[np.ix_(pq, pvpq)], dq_dv[np.ix_(pq, pq)]],
            ]
        )
        try:
            step = np.linalg.solve(jac, mis)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"Jacobian singular at iteration {iters}") from exc
        th[pvpq] += step[:npv]
        v[pq] += step[npv:]
        np.maximum(v, 1e-6, out=v)
        iters += 1


def solve_pf_spec(
    y: AdmittanceMatrix,
    spec: InjectionSpec,
    opts: PFSolveOptions | None = None,
    warm: VoltageState | None = None,
) -> PFSolution:
    """Newton-Raphson solve of the power-flow equations for an InjectionSpec."""
    opts = opts or PFSolveOptions()
    n = y.n
    if spec.n != n:
        raise DimensionMismatch(f"spec has {spec.n} buses, matrix has {n}")

    kinds = list(spec.kinds)
    q_spec = spec.q.astype(float).copy()
    if warm is not None:  # a supplied warm state overrides the flat start
        v = warm.v.copy()
        th = warm.theta.copy()
    else:
        v = np.ones(n)
        th = np.zeros(n)
    held = [i for i in range(n) if kinds[i] is not BusKind.PQ]
    v[held] = spec.v[held]
    th[[i for i in range(n) if kinds[i] is BusKind.SLACK]] = 0.0

    switched: list[int] = []
    total_iters = 0
    rounds = opts.max_switch_rounds if opts.enforce_q_limits else 1
    for _ in range(rounds):
        v, th, iters, residual = _newton(
            y.g, y.b, kinds, spec.p, q_spec, v, th, opts.tol, opts.max_iter
        )
        total_iters += iters
        if not opts.enforce_q_limits:
            break
        p_now, q_now = _accel.injections_dense(y.g, y.b, v[None, :], th[None, :])
        q_now = q_now[0]
        viol = [
            i
            for i in range(n)
            if kinds[i] is BusKind.PV
            and (q_now[i] > spec.q_high[i] + opts.tol or q_now[i] < spec.q_low[i] - opts.tol)
        ]
        if not viol:
            break
        for i in viol:
            kinds[i] = BusKind.PQ
            q_spec[i] = min(max(q_now[i], spec.q_low[i]), spec.q_high[i])
            switched.append(i)
    return PFSolution(
        state=VoltageState(v=v, theta=th),
        iterations=total_iters,
        residual=residual,
        switched=tuple(switched),
    )


@dataclass(frozen=True)
class DispatchResult:
    """Merit-order generator setpoints for one load pattern."""

    p_set: np.ndarray  # per generator, aligned with grid.generators
    pool: tuple[int, ...]  # generator indices eligible for this dispatch
    load: PowerState  # the served load, as injections
    costs: np.ndarray  # costs used for the ordering


def dispatch(
    grid: GridCase,
    load: PowerState,
    costs: np.ndarray | None = None,
    available=None,
    loss_margin: float = 0.05,
) -> DispatchResult:
    """Fill generators in ascending cost order until the total load is met.

    The marginal generator is partially loaded; losses are left to the slack
    bus in the subsequent power-flow solve. Setpoints respect [p_min, p_max].
    """
    if load.n != grid.n_bus:
        raise DimensionMismatch("load vector length != number of buses")
    gens = grid.generators
    pool = tuple(range(len(gens))) if available is None else tuple(sorted(available))
    for gi in pool:
        if not 0 <= gi < len(gens):
            raise InfeasibleDispatch(f"generator index {gi} out of range")
    cost_arr = (
        np.array([g.cost for g in gens], dtype=float)
        if costs is None
        else np.asarray(costs, dtype=float)
    )
    if cost_arr.shape != (len(gens),):
        raise DimensionMismatch("costs must align with grid.generators")

    demand = float(-np.sum(load.p))  # total consumption
    capacity = float(sum(gens[gi].p_max for gi in pool))
    if demand > 0 and capacity < demand * (1.0 + loss_margin):
        raise InfeasibleDispatch(
            f"available capacity {capacity:.4f} < load {demand:.4f} "
            f"plus {loss_margin:.0%} loss margin"
        )

    p_set = np.zeros(len(gens))
    remaining = max(demand, 0.0)
    order = sorted(pool, key=lambda gi: (cost_arr[gi], gi))
    for gi in order:
        take = min(max(remaining, gens[gi].p_min), gens[gi].p_max)
        p_set[gi] = take
        remaining -= take
    if remaining > 1e-9:
        raise InfeasibleDispatch(f"could not place {remaining:.4f} of load")
    return DispatchResult(p_set=p_set, pool=pool, load=load, costs=cost_arr)


def injection_spec(grid: GridCase, disp: DispatchResult) -> InjectionSpec:
    """Bus-level solve constraints implied by a dispatch.

    A bus is PV while it has at least one pooled generator (the slack bus
    stays slack); otherwise it is PQ with its load as the only injection.
    """
    n = grid.n_bus
    p = disp.load.p.copy()
    q = disp.load.q.copy()
    v = np.ones(n)
    q_low = np.full(n, -np.inf)
    q_high = np.full(n, np.inf)
    kinds = [BusKind.PQ] * n

    by_bus: dict[int, list[int]] = {}
    for gi in disp.pool:
        by_bus.setdefault(grid.generators[gi].bus, []).append(gi)

    slack = grid.slack_id
    for bus, gis in by_bus.items():
        p[bus] += float(disp.p_set[gis].sum())
        v[bus] = grid.generators[gis[0]].v_set
        if bus != slack:
            kinds[bus] = BusKind.PV
            q_low[bus] = disp.load.q[bus] + sum(grid.generators[gi].q_min for gi in gis)
            q_high[bus] = disp.load.q[bus] + sum(grid.generators[gi].q_max for gi in gis)
    kinds[slack] = BusKind.SLACK
    return InjectionSpec(
        kinds=tuple(kinds), p=p, q=q, v=v, q_low=q_low, q_high=q_high
    )


def solve_pf(
    grid: GridCase,
    disp: DispatchResult,
    opts: PFSolveOptions | None = None,
    warm: VoltageState | None = None,
) -> PFSolution:
    """Dispatch-driven power flow on a grid case."""
    from .grid_model import assemble_admittance

    return solve_pf_spec(assemble_admittance(grid), injection_spec(grid, disp), opts, warm)
