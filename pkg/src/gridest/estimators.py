"""Trainable estimators of nodal power injections from voltage measurements.

Two models are provided. The physics-embedded estimator carries learnable
per-line (r, x) and per-node shunt (g, b) parameters of an effective network
over the observed buses, evaluates the power-flow map with them, and adds a
graph-masked neural correction representing whatever the effective network
cannot express (unobserved injections under partial observability). The
baseline is a plain fully-connected network mapping observed (v, theta)
directly to observed (p, q).

Both minimize the mean squared injection mismatch
    (1 / (N * m)) * sum_n  || S_n - prediction_n ||^2
over N samples and m observed buses (squares of active and reactive errors
summed), the hybrid with an extra L2 penalty reg_coeff * ||phi||^2 on the
correction-network weights only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .datagen import SampleSet
from .diffkit import layers as L
from .diffkit import optim as O
from .diffkit import tape as T
from .grid_model import EPS_Z, AdmittanceMatrix, GridCase, ValidationError
from .kron import ReducedModel


class Divergence(Exception):
    """Training loss became non-finite or exploded past 1e3x its start."""


# --- batches and physical parameters -----------------------------------------


@dataclass(frozen=True)
class ObservedBatch:
    """Measurements restricted to the observed buses: (N, m) arrays."""

    v: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    q: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.v.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.v.shape[1]


def observed_batch(samples: SampleSet, observed: tuple[int, ...]) -> ObservedBatch:
    obs = list(observed)
    if obs != sorted(set(obs)) or (obs and obs[-1] >= samples.n_bus):
        raise ValidationError("observed ids must be sorted, unique, in range")
    return ObservedBatch(
        v=samples.v[:, obs].copy(),
        theta=samples.theta[:, obs].copy(),
        p=samples.p[:, obs].copy(),
        q=samples.q[:, obs].copy(),
    )


@dataclass
class PhysParams:
    """Learnable effective-network parameters over m observed nodes:
    per edge series (r, x), per node shunt (g, b). Flat layout
    [r | x | shunt_g | shunt_b] with 2*E + 2*m entries."""

    edges: tuple[tuple[int, int], ...]
    r: np.ndarray
    x: np.ndarray
    shunt_g: np.ndarray
    shunt_b: np.ndarray

    @staticmethod
    def initial(
        edges: tuple[tuple[int, int], ...],
        n_nodes: int,
        init_r: float,
        init_x: float,
        init_shunt_g: float,
        init_shunt_b: float,
    ) -> "PhysParams":
        e = len(edges)
        return PhysParams(
            edges=tuple(edges),
            r=np.full(e, float(init_r)),
            x=np.full(e, float(init_x)),
            shunt_g=np.full(n_nodes, float(init_shunt_g)),
            shunt_b=np.full(n_nodes, float(init_shunt_b)),
        )

    @property
    def n_nodes(self) -> int:
        return self.shunt_g.shape[0]

    @property
    def n_params(self) -> int:
        return 2 * len(self.edges) + 2 * self.n_nodes

    def param_arrays(self) -> list[np.ndarray]:
        return [self.r, self.x, self.shunt_g, self.shunt_b]

    def section_names(self) -> list[str]:
        return ["r", "x", "shunt_g", "shunt_b"]

    def set_params(self, arrays: list[np.ndarray]) -> None:
        self.r, self.x, self.shunt_g, self.shunt_b = (
            np.asarray(a, dtype=float) for a in arrays
        )

    def edge_admittances(self) -> tuple[np.ndarray, np.ndarray]:
        zz = self.r * self.r + self.x * self.x
        return self.r / zz, -self.x / zz

    def assemble(self) -> AdmittanceMatrix:
        """Bus-admittance matrix of the effective network."""
        m = self.n_nodes
        ge, be = self.edge_admittances()
        y = np.zeros((m, m), dtype=complex)
        for k, (i, j) in enumerate(self.edges):
            y_e = complex(ge[k], be[k])
            y[i, j] -= y_e
            y[j, i] -= y_e
            y[i, i] += y_e
            y[j, j] += y_e
        y[np.diag_indices(m)] += self.shunt_g + 1j * self.shunt_b
        return AdmittanceMatrix(y)


def clamp_impedances(r: np.ndarray, x: np.ndarray, eps: float = EPS_Z) -> None:
    """Rescale (r, x) pairs in place so r^2 + x^2 >= eps."""
    zz = r * r + x * x
    dead = zz == 0.0
    if dead.any():
        x[dead] = math.sqrt(eps)
        zz = r * r + x * x
    bad = zz < eps
    if bad.any():
        s = np.sqrt(eps / zz[bad])
        r[bad] *= s
        x[bad] *= s


def adjacency_mask(edges, n_nodes: int) -> np.ndarray:
    mask = np.zeros((n_nodes, n_nodes))
    for i, j in edges:
        mask[i, j] = 1.0
        mask[j, i] = 1.0
    return mask


@dataclass(frozen=True)
class _SamplePack:
    """Per-batch constants for the edge-network injection kernel and the
    correction features; built once per training run."""

    fr: np.ndarray
    to: np.ndarray
    v2: np.ndarray  # (N, m)
    vv: np.ndarray  # (N, E) v_f * v_t
    cs: np.ndarray  # (N, E) cos(th_f - th_t)
    sn: np.ndarray  # (N, E) sin(th_f - th_t)
    feats: np.ndarray  # (N, m, 4) correction-network input


def build_pack(batch_v: np.ndarray, batch_theta: np.ndarray, edges) -> _SamplePack:
    fr = np.array([e[0] for e in edges], dtype=np.int64)
    to = np.array([e[1] for e in edges], dtype=np.int64)
    m = batch_v.shape[1]
    v2 = batch_v * batch_v
    vv = batch_v[:, fr] * batch_v[:, to]
    dth = batch_theta[:, fr] - batch_theta[:, to]
    cs = np.cos(dth)
    sn = np.sin(dth)
    # node features: own magnitude plus neighbor aggregates of the edge
    # quantities (cos/sin of angle differences and magnitude products);
    # functions of angle differences only, hence invariant to a global shift
    n_samp = batch_v.shape[0]
    feats = np.zeros((n_samp, m, 4))
    feats[:, :, 0] = batch_v
    for k in range(fr.shape[0]):
        i, j = fr[k], to[k]
        feats[:, i, 1] += cs[:, k]
        feats[:, j, 1] += cs[:, k]
        feats[:, i, 2] += sn[:, k]
        feats[:, j, 2] -= sn[:, k]
        feats[:, i, 3] += vv[:, k]
        feats[:, j, 3] += vv[:, k]
    return _SamplePack(fr=fr, to=to, v2=v2, vv=vv, cs=cs, sn=sn, feats=feats)


# --- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    lr: float
    epochs: int
    reg_coeff: float = 0.0
    batch_mode: str = "full"  # "full" or an int-like chunk size via batch_size
    batch_size: int | None = None
    init_r: float = 1.0
    init_x: float = 1.0
    init_shunt_g: float = 1.0
    init_shunt_b: float = 1.0
    units_per_layer: int = 32
    n_layers: int = 3
    activation: str = "softsign"
    use_correction: bool = False
    seed: int = 0
    early_stop_loss: float | None = None
    record_every: int = 1

    def __post_init__(self):
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if self.reg_coeff < 0:
            raise ValidationError("reg_coeff must be non-negative")
        if self.batch_mode not in ("full", "chunked"):
            raise ValidationError("batch_mode must be 'full' or 'chunked'")
        if self.batch_mode == "chunked" and not self.batch_size:
            raise ValidationError("chunked batch_mode needs batch_size")
        if self.activation not in T.ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "epochs": self.epochs,
            "reg_coeff": self.reg_coeff,
            "batch_mode": self.batch_mode,
            "batch_size": self.batch_size,
            "init_r": self.init_r,
            "init_x": self.init_x,
            "init_shunt_g": self.init_shunt_g,
            "init_shunt_b": self.init_shunt_b,
            "units_per_layer": self.units_per_layer,
            "n_layers": self.n_layers,
            "activation": self.activation,
            "use_correction": self.use_correction,
            "seed": self.seed,
            "early_stop_loss": self.early_stop_loss,
            "record_every": self.record_every,
        }


@dataclass
class TrainReport:
    """Per-epoch loss trace plus final values. trace rows are
    (epoch, loss, data_term, reg_term)."""

    trace: np.ndarray
    final_loss: float
    final_data: float
    final_reg: float
    epochs_run: int
    config: TrainConfig

    def save_trace_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,loss,data_term,reg_term\n")
            for row in self.trace:
                fh.write(
                    f"{int(row[0])},{repr(float(row[1]))},"
                    f"{repr(float(row[2]))},{repr(float(row[3]))}\n"
                )


# --- models -------------------------------------------------------------------


@dataclass
class PgnnModel:
    """Physics-embedded estimator: effective network + optional correction."""

    observed: tuple[int, ...]
    params: PhysParams
    net: L.GraphNet | None = None

    def predict(self, v: np.ndarray, theta: np.ndarray):
        """Estimated (p, q) at the observed buses for (N, m) inputs."""
        pack = build_pack(np.asarray(v, float), np.asarray(theta, float), self.params.edges)
        tape = T.Tape()
        p_pred, q_pred = _pgnn_forward(tape, self.params, self.net, pack, None, None)
        return p_pred.value, q_pred.value


@dataclass
class VanillaModel:
    """Physics-blind baseline: dense network from (v, theta) to (p, q)."""

    observed: tuple[int, ...]
    net: L.MLP

    def predict(self, v: np.ndarray, theta: np.ndarray):
        x = np.concatenate([np.asarray(v, float), np.asarray(theta, float)], axis=1)
        tape = T.Tape()
        out = self.net.forward(tape.var(x)).value
        m = len(self.observed)
        return out[:, :m], out[:, m:]


def predict_injections(model, v: np.ndarray, theta: np.ndarray):
    """Uniform prediction entry point for either estimator."""
    return model.predict(v, theta)


# --- loss construction ---------------------------------------------------------


def _pgnn_forward(tape, params, net, pack, phys_vars, net_vars):
    """Predicted (p, q) Vars; phys_vars/net_vars None means constants."""
    if phys_vars is None:
        rv, xv, gshv, bshv = (tape.var(a) for a in params.param_arrays())
    else:
        rv, xv, gshv, bshv = phys_vars
    den = T.add(T.mul(rv, rv), T.mul(xv, xv))
    ge = T.div(rv, den)
    be = T.neg(T.div(xv, den))
    p_pred, q_pred = T.grid_injections(ge, be, gshv, bshv, pack)
    if net is not None:
        out = net.forward(tape.var(pack.feats), net_vars)
        p_pred = T.add(p_pred, T.take_channel(out, 0))
        q_pred = T.add(q_pred, T.take_channel(out, 1))
    return p_pred, q_pred


def _pgnn_losses(tape, net, pack, p_obs, q_obs, reg_coeff, phys_vars, net_vars):
    p_pred, q_pred = _pgnn_forward(tape, None, net, pack, phys_vars, net_vars)
    n_samp, m = p_obs.shape
    rp = T.sub(p_pred, p_obs)
    rq = T.sub(q_pred, q_obs)
    data = T.scale(T.add(T.sum_all(T.square(rp)), T.sum_all(T.square(rq))), 1.0 / (n_samp * m))
    if net is not None and reg_coeff > 0.0 and net_vars is not None:
        acc = None
        for w in net_vars:
            term = T.sum_all(T.square(w))
            acc = term if acc is None else T.add(acc, term)
        reg = T.scale(acc, reg_coeff)
        return T.add(data, reg), data, reg
    return data, data, None


def pgnn_loss(
    params: PhysParams,
    net: L.GraphNet | None,
    batch: ObservedBatch,
    reg_coeff: float = 0.0,
):
    """Loss of the physics-embedded estimator and its gradients.

    Returns (loss, data_term, reg_term, grads) with grads keyed by section
    name: r, x, shunt_g, shunt_b, then the correction-network sections.
    """
    pack = build_pack(batch.v, batch.theta, params.edges)
    tape = T.Tape()
    phys_vars = [tape.var(a) for a in params.param_arrays()]
    net_vars = [tape.var(a) for a in net.param_arrays()] if net is not None else None
    loss, data, reg = _pgnn_losses(
        tape, net, pack, batch.p, batch.q, reg_coeff, phys_vars, net_vars
    )
    tape.backward(loss)
    names = params.section_names() + (net.section_names() if net is not None else [])
    all_vars = phys_vars + (net_vars or [])
    grads = {name: var.grad() for name, var in zip(names, all_vars)}
    return (
        float(loss.value),
        float(data.value),
        float(reg.value) if reg is not None else 0.0,
        grads,
    )


def vanilla_loss(net: L.MLP, batch: ObservedBatch):
    """Baseline mean squared injection mismatch and gradients per section."""
    x = np.concatenate([batch.v, batch.theta], axis=1)
    y = np.concatenate([batch.p, batch.q], axis=1)
    tape = T.Tape()
    net_vars = [tape.var(a) for a in net.param_arrays()]
    out = net.forward(tape.var(x), net_vars)
    loss = T.scale(
        T.sum_all(T.square(T.sub(out, y))), 1.0 / (batch.n_samples * batch.n_nodes)
    )
    tape.backward(loss)
    grads = {name: var.grad() for name, var in zip(net.section_names(), net_vars)}
    return float(loss.value), grads


# --- training loops -------------------------------------------------------------


def _resolve_topology(topology) -> tuple[tuple[int, ...], tuple[tuple[int, int], ...]]:
    """(observed bus ids, edge list in observed positions) of the effective
    network: a full grid uses its own lines, a reduced model its kept edges."""
    if isinstance(topology, GridCase):
        observed = tuple(range(topology.n_bus))
        edges = tuple((ln.from_bus, ln.to_bus) for ln in topology.lines)
        return observed, edges
    if isinstance(topology, ReducedModel):
        return tuple(topology.observed), tuple(topology.edges)
    raise ValidationError("topology must be a GridCase or a ReducedModel")


def _check_divergence(loss: float, initial: float) -> None:
    if not math.isfinite(loss) or loss > 1e3 * max(initial, 1e-30):
        raise Divergence(f"loss {loss:.3e} from initial {initial:.3e}")


def _chunk_slices(n: int, config: TrainConfig) -> list[slice]:
    if config.batch_mode == "full":
        return [slice(0, n)]
    size = int(config.batch_size)
    return [slice(a, min(a + size, n)) for a in range(0, n, size)]


def train_pgnn(topology, train: ObservedBatch, config: TrainConfig, warm_model: "PgnnModel | None" = None):
    """Fit the physics-embedded estimator with Adam.

    Returns (PgnnModel, TrainReport). The correction network is enabled by
    config.use_correction; impedances are clamped away from zero after every
    step so edge admittances stay finite. A warm_model with matching edges
    seeds the physical parameters (its correction net is reused only when the
    edge set is unchanged).
    """
    observed, edges = _resolve_topology(topology)
    m = len(observed)
    if train.n_nodes != m:
        raise ValidationError(
            f"batch has {train.n_nodes} nodes but topology has {m} observed buses"
        )
    params = PhysParams.initial(
        edges, m, config.init_r, config.init_x, config.init_shunt_g, config.init_shunt_b
    )
    if warm_model is not None:
        src = {e: k for k, e in enumerate(warm_model.params.edges)}
        for k, e in enumerate(edges):
            if e in src:
                params.r[k] = warm_model.params.r[src[e]]
                params.x[k] = warm_model.params.x[src[e]]
        params.shunt_g = warm_model.params.shunt_g.copy()
        params.shunt_b = warm_model.params.shunt_b.copy()
    net = None
    if config.use_correction:
        if (
            warm_model is not None
            and warm_model.net is not None
            and warm_model.params.edges == edges
        ):
            net = warm_model.net
        else:
            rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(101,)))
            sizes = [4] + [config.units_per_layer] * config.n_layers + [2]
            net = L.GraphNet.build(adjacency_mask(edges, m), sizes, config.activation, rng)

    chunks = _chunk_slices(train.n_samples, config)
    packs = [
        (build_pack(train.v[sl], train.theta[sl], edges), train.p[sl], train.q[sl])
        for sl in chunks
    ]
    weights = [(sl.stop - sl.start) / train.n_samples for sl in chunks]
    arrays = params.param_arrays() + (net.param_arrays() if net is not None else [])
    n_phys = 4
    adam = O.AdamState.for_params(arrays, config.lr)

    def evaluate(arrs, pack, p_obs, q_obs):
        tape = T.Tape()
        phys_vars = [tape.var(a) for a in arrs[:n_phys]]
        net_vars = [tape.var(a) for a in arrs[n_phys:]] if net is not None else None
        loss, data, reg = _pgnn_losses(
            tape, net, pack, p_obs, q_obs, config.reg_coeff, phys_vars, net_vars
        )
        tape.backward(loss)
        grads = [v.grad() for v in phys_vars + (net_vars or [])]
        return (
            float(loss.value),
            float(data.value),
            float(reg.value) if reg is not None else 0.0,
            grads,
        )

    trace = []
    initial_loss = None
    epochs_run = 0
    for epoch in range(config.epochs):
        loss = data = reg = 0.0
        for (pack, p_obs, q_obs), w in zip(packs, weights):
            c_loss, c_data, c_reg, grads = evaluate(arrays, pack, p_obs, q_obs)
            loss += w * c_loss
            data += w * c_data
            reg += w * c_reg
            arrays = O.adam_step(adam, arrays, grads)
            clamp_impedances(arrays[0], arrays[1])
        if initial_loss is None:
            initial_loss = loss
        if epoch % config.record_every == 0:
            trace.append((epoch, loss, data, reg))
        _check_divergence(loss, initial_loss)
        epochs_run = epoch + 1
        if config.early_stop_loss is not None and loss <= config.early_stop_loss:
            break

    params.set_params(arrays[:n_phys])
    if net is not None:
        net.set_params(arrays[n_phys:])
    final = [0.0, 0.0, 0.0]
    for (pack, p_obs, q_obs), w in zip(packs, weights):
        c_loss, c_data, c_reg, _ = evaluate(arrays, pack, p_obs, q_obs)
        final[0] += w * c_loss
        final[1] += w * c_data
        final[2] += w * c_reg
    final_loss, final_data, final_reg = final
    trace.append((epochs_run, final_loss, final_data, final_reg))
    report = TrainReport(
        trace=np.array(trace, dtype=float).reshape(-1, 4),
        final_loss=final_loss,
        final_data=final_data,
        final_reg=final_reg,
        epochs_run=epochs_run,
        config=config,
    )
    return PgnnModel(observed=observed, params=params, net=net), report


def train_pgnn_blind(
    observed: tuple[int, ...],
    train: ObservedBatch,
    config: TrainConfig,
    threshold_rel: float = 0.02,
    warmup_epochs: int | None = None,
):
    """Fit without a reference topology: warm up on the complete graph over
    the observed buses, prune edges whose learned admittance magnitude falls
    below threshold_rel of the largest one, then continue on the pruned graph
    (physical parameters carried over, correction net rebuilt for the new
    adjacency). Returns (PgnnModel, TrainReport of the final stage)."""
    m = len(observed)
    complete = tuple((i, j) for i in range(m) for j in range(i + 1, m))
    if warmup_epochs is None:
        warmup_epochs = max(1, config.epochs // 5)
    warm_cfg_dict = config.to_dict()
    warm_cfg_dict["epochs"] = warmup_epochs
    warm_cfg = TrainConfig(**warm_cfg_dict)
    warm_topo = ReducedModel(
        observed=tuple(observed),
        y_reduced=PhysParams.initial(complete, m, 1.0, 1.0, 0.0, 0.0).assemble(),
        edges=complete,
        threshold_rel=threshold_rel,
        n_components=1,
    )
    warm, _ = train_pgnn(warm_topo, train, warm_cfg)

    ge, be = warm.params.edge_admittances()
    mag = np.hypot(ge, be)
    cutoff = threshold_rel * mag.max()
    kept = tuple(e for k, e in enumerate(complete) if mag[k] >= cutoff)
    if not kept:
        kept = complete
    final_topo = ReducedModel(
        observed=tuple(observed),
        y_reduced=warm.params.assemble(),
        edges=kept,
        threshold_rel=threshold_rel,
        n_components=1,
    )
    return train_pgnn(final_topo, train, config, warm_model=warm)


def train_vanilla(observed: tuple[int, ...], train: ObservedBatch, config: TrainConfig):
    """Fit the dense baseline with Adam. Returns (VanillaModel, TrainReport).

    The success criterion used in reports is train loss <= 1e-4."""
    m = len(observed)
    if train.n_nodes != m:
        raise ValidationError("batch nodes != observed bus count")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(202,)))
    sizes = [2 * m] + [config.units_per_layer] * config.n_layers + [2 * m]
    net = L.MLP.build(sizes, config.activation, rng)

    x = np.concatenate([train.v, train.theta], axis=1)
    y = np.concatenate([train.p, train.q], axis=1)
    chunks = _chunk_slices(train.n_samples, config)
    weights = [(sl.stop - sl.start) / train.n_samples for sl in chunks]
    arrays = net.param_arrays()
    adam = O.AdamState.for_params(arrays, config.lr)

    def evaluate(arrs, sl):
        tape = T.Tape()
        net_vars = [tape.var(a) for a in arrs]
        out = net.forward(tape.var(x[sl]), net_vars)
        norm = 1.0 / ((sl.stop - sl.start) * m)
        loss = T.scale(T.sum_all(T.square(T.sub(out, y[sl]))), norm)
        tape.backward(loss)
        return float(loss.value), [v.grad() for v in net_vars]

    trace = []
    initial_loss = None
    epochs_run = 0
    for epoch in range(config.epochs):
        loss = 0.0
        for sl, w in zip(chunks, weights):
            c_loss, grads = evaluate(arrays, sl)
            loss += w * c_loss
            arrays = O.adam_step(adam, arrays, grads)
        if initial_loss is None:
            initial_loss = loss
        if epoch % config.record_every == 0:
            trace.append((epoch, loss, loss, 0.0))
        _check_divergence(loss, initial_loss)
        epochs_run = epoch + 1
        if config.early_stop_loss is not None and loss <= config.early_stop_loss:
            break

    net.set_params(arrays)
    final_loss = sum(w * evaluate(arrays, sl)[0] for sl, w in zip(chunks, weights))
    trace.append((epochs_run, final_loss, final_loss, 0.0))
    report = TrainReport(
        trace=np.array(trace, dtype=float).reshape(-1, 4),
        final_loss=final_loss,
        final_data=final_loss,
        final_reg=0.0,
        epochs_run=epochs_run,
        config=config,
    )
    return VanillaModel(observed=tuple(observed), net=net), report


# --- checkpoints -----------------------------------------------------------------


def _flatten_sections(names, arrays):
    sections = {}
    values = []
    offset = 0
    for name, arr in zip(names, arrays):
        flat = np.asarray(arr, dtype=float).ravel()
        sections[name] = {"offset": offset, "shape": list(np.asarray(arr).shape)}
        values.extend(float(x) for x in flat)
        offset += flat.size
    return sections, values


def save_checkpoint(model, path, extra: dict | None = None) -> None:
    """Serialize a trained model as flat values plus a named-section index."""
    if isinstance(model, PgnnModel):
        names = model.params.section_names()
        arrays = model.params.param_arrays()
        net_doc = None
        if model.net is not None:
            names = names + model.net.section_names()
            arrays = arrays + model.net.param_arrays()
            net_doc = {
                "feature_sizes": [model.net.layers[0].w_self.shape[0]]
                + [lay.w_self.shape[1] for lay in model.net.layers],
                "activation": model.net.layers[0].activation
                if len(model.net.layers) > 1
                else "identity",
            }
        sections, values = _flatten_sections(names, arrays)
        doc = {
            "model": "pgnn",
            "observed": list(model.observed),
            "edges": [list(e) for e in model.params.edges],
            "net": net_doc,
            "sections": sections,
            "values": values,
        }
    elif isinstance(model, VanillaModel):
        names = model.net.section_names()
        arrays = model.net.param_arrays()
        sections, values = _flatten_sections(names, arrays)
        doc = {
            "model": "vanilla",
            "observed": list(model.observed),
            "net": {
                "sizes": [model.net.layers[0].weights.shape[0]]
                + [lay.weights.shape[1] for lay in model.net.layers],
                "activation": model.net.layers[0].activation,
            },
            "sections": sections,
            "values": values,
        }
    else:
        raise ValidationError("unknown model type")
    if extra:
        doc["extra"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _unflatten(doc, names):
    values = np.asarray(doc["values"], dtype=float)
    arrays = []
    for name in names:
        meta = doc["sections"][name]
        shape = tuple(meta["shape"])
        size = int(np.prod(shape)) if shape else 1
        arrays.append(values[meta["offset"] : meta["offset"] + size].reshape(shape))
    return arrays


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    observed = tuple(int(i) for i in doc["observed"])
    if doc["model"] == "pgnn":
        edges = tuple((int(a), int(b)) for a, b in doc["edges"])
        m = len(observed)
        params = PhysParams.initial(edges, m, 1, 1, 0, 0)
        phys_names = params.section_names()
        net = None
        if doc.get("net"):
            sizes = [int(s) for s in doc["net"]["feature_sizes"]]
            net = L.GraphNet.build(
                adjacency_mask(edges, m),
                sizes,
                doc["net"]["activation"],
                np.random.default_rng(0),
            )
            all_names = phys_names + net.section_names()
            arrays = _unflatten(doc, all_names)
            params.set_params(arrays[:4])
            net.set_params(arrays[4:])
        else:
            params.set_params(_unflatten(doc, phys_names))
        return PgnnModel(observed=observed, params=params, net=net)
    if doc["model"] == "vanilla":
        sizes = [int(s) for s in doc["net"]["sizes"]]
        net = L.MLP.build(sizes, doc["net"]["activation"], np.random.default_rng(0))
        net.set_params(_unflatten(doc, net.section_names()))
        return VanillaModel(observed=observed, net=net)
    raise ValidationError(f"unknown checkpoint model {doc['model']!r}")
