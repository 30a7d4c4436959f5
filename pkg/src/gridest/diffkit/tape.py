"""Reverse-mode differentiation over a recorded operation tape.

Values are float64 numpy arrays (scalars are 0-d arrays). Operations record
(outputs, inputs, vjp) nodes on a Tape in execution order; the backward pass
walks the record once in reverse, which is a reverse topological order, and
accumulates adjoints in a fixed sequence so repeated runs are bitwise
identical. Operands may be Vars or plain arrays; plain arrays are treated as
constants and receive no adjoint. Broadcasting is limited to the explicit
cases each op documents.
"""

from __future__ import annotations

import numpy as np

from .. import _accel


class NonFiniteValue(Exception):
    """A NaN/Inf appeared; the message names the producing operation."""


class Var:
    """A tape-tracked array value with an adjoint slot."""

    __slots__ = ("value", "adjoint", "tape", "name")

    def __init__(self, value, tape, name=""):
        self.value = np.asarray(value, dtype=float)
        self.adjoint = None
        self.tape = tape
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def grad(self) -> np.ndarray:
        """Adjoint after backward(); zeros when the var was unused."""
        if self.adjoint is None:
            return np.zeros_like(self.value)
        return self.adjoint

    # convenience operators (Var op Var/const)
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)


class Tape:
    """Recorder for one forward evaluation."""

    def __init__(self, check_finite: bool = True):
        self.check_finite = check_finite
        self._nodes: list[tuple[tuple[Var, ...], tuple, object]] = []

    def var(self, value, name: str = "") -> Var:
        return Var(value, self, name)

    def record(self, op_name: str, out_values, inputs, vjp) -> tuple[Var, ...]:
        outs = tuple(Var(val, self, name=op_name) for val in out_values)
        if self.check_finite:
            for o in outs:
                if not np.all(np.isfinite(o.value)):
                    raise NonFiniteValue(f"op {op_name!r} produced a non-finite value")
        self._nodes.append((outs, tuple(inputs), vjp))
        return outs

    def backward(self, root: Var, seed=1.0) -> None:
        """Accumulate adjoints of every recorded Var w.r.t. root."""
        if root.tape is not self:
            raise ValueError("root does not belong to this tape")
        root.adjoint = np.broadcast_to(np.asarray(seed, dtype=float), root.shape).copy()
        for outs, inputs, vjp in reversed(self._nodes):
            if all(o.adjoint is None for o in outs):
                continue
            out_adjoints = tuple(
                o.adjoint if o.adjoint is not None else np.zeros_like(o.value)
                for o in outs
            )
            contribs = vjp(*out_adjoints)
            for operand, contrib in zip(inputs, contribs):
                if not isinstance(operand, Var) or contrib is None:
                    continue
                if operand.adjoint is None:
                    operand.adjoint = np.zeros_like(operand.value)
                operand.adjoint += contrib


def _value(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=float)


def _tape(*operands) -> Tape:
    for x in operands:
        if isinstance(x, Var):
            return x.tape
    raise TypeError("at least one operand must be a tape Var")


def _unbroadcast(adj: np.ndarray, shape) -> np.ndarray:
    """Sum an adjoint down to the shape of a broadcast operand."""
    if adj.shape == tuple(shape):
        return adj
    extra = adj.ndim - len(shape)
    if extra > 0:
        adj = adj.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and adj.shape[i] != 1)
    if axes:
        adj = adj.sum(axis=axes, keepdims=True)
    return adj


def _record1(name, out, inputs, vjp):
    tape = _tape(*inputs)
    (res,) = tape.record(name, (out,), inputs, vjp)
    return res


# --- arithmetic ---------------------------------------------------------------


def add(a, b) -> Var:
    av, bv = _value(a), _value(b)
    return _record1(
        "add",
        av + bv,
        (a, b),
        lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)),
    )


def sub(a, b) -> Var:
    av, bv = _value(a), _value(b)
    return _record1(
        "sub",
        av - bv,
        (a, b),
        lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)),
    )


def mul(a, b) -> Var:
    av, bv = _value(a), _value(b)
    return _record1(
        "mul",
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def div(a, b) -> Var:
    av, bv = _value(a), _value(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = av / bv
    return _record1(
        "div",
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / bv, av.shape),
            _unbroadcast(-g * av / (bv * bv), bv.shape),
        ),
    )


def neg(a) -> Var:
    av = _value(a)
    return _record1("neg", -av, (a,), lambda g: (-g,))


def square(a) -> Var:
    av = _value(a)
    return _record1("square", av * av, (a,), lambda g: (2.0 * av * g,))


def sin(a) -> Var:
    av = _value(a)
    return _record1("sin", np.sin(av), (a,), lambda g: (np.cos(av) * g,))


def cos(a) -> Var:
    av = _value(a)
    return _record1("cos", np.cos(av), (a,), lambda g: (-np.sin(av) * g,))


def relu(a) -> Var:
    av = _value(a)
    return _record1("relu", np.maximum(av, 0.0), (a,), lambda g: ((av > 0.0) * g,))


def softsign(a) -> Var:
    av = _value(a)
    den = 1.0 + np.abs(av)
    return _record1("softsign", av / den, (a,), lambda g: (g / (den * den),))


def identity(a) -> Var:
    av = _value(a)
    return _record1("identity", av.copy(), (a,), lambda g: (g,))


ACTIVATIONS = {"relu": relu, "softsign": softsign, "identity": identity}


# --- shape / reduction --------------------------------------------------------


def slice1d(a, start: int, stop: int) -> Var:
    av = _value(a)

    def vjp(g):
        out = np.zeros_like(av)
        out[start:stop] = g
        return (out,)

    return _record1("slice1d", av[start:stop].copy(), (a,), vjp)


def reshape(a, shape) -> Var:
    av = _value(a)
    return _record1(
        "reshape", av.reshape(shape).copy(), (a,), lambda g: (g.reshape(av.shape),)
    )


def take_channel(a, k: int) -> Var:
    """Select index k of the last axis: (..., C) -> (...)."""
    av = _value(a)

    def vjp(g):
        out = np.zeros_like(av)
        out[..., k] = g
        return (out,)

    return _record1("take_channel", av[..., k].copy(), (a,), vjp)


def sum_all(a) -> Var:
    av = _value(a)
    return _record1(
        "sum_all", np.asarray(av.sum()), (a,), lambda g: (np.broadcast_to(g, av.shape).copy(),)
    )


def scale(a, c: float) -> Var:
    av = _value(a)
    return _record1("scale", av * c, (a,), lambda g: (g * c,))


# --- linear algebra -----------------------------------------------------------


def matmul(a, b) -> Var:
    """2-d matrix product (B, m) @ (m, k)."""
    av, bv = _value(a), _value(b)
    return _record1("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def linear_nodes(x, w) -> Var:
    """Per-node linear map: (B, n, f) x (f, g) -> (B, n, g)."""
    xv, wv = _value(x), _value(w)
    bsz, n, f = xv.shape
    x2 = xv.reshape(bsz * n, f)
    out = (x2 @ wv).reshape(bsz, n, wv.shape[1])

    def vjp(g):
        g2 = g.reshape(bsz * n, wv.shape[1])
        return ((g2 @ wv.T).reshape(xv.shape), x2.T @ g2)

    return _record1("linear_nodes", out, (x, w), vjp)


def mix_nodes(mask: np.ndarray, x) -> Var:
    """Aggregate neighbor features through a constant adjacency mask:
    out[b, i] = sum_j mask[i, j] * x[b, j]."""
    xv = _value(x)
    out = np.matmul(mask, xv)
    return _record1("mix_nodes", out, (x,), lambda g: (np.matmul(mask.T, g),))


def grid_injections(ge, be, gsh, bsh, pack) -> tuple[Var, Var]:
    """Nodal (p, q) of an edge-parameterized network over a constant batch.

    pack is an estimators._SamplePack with the per-sample trig constants; the
    heavy forward/adjoint work runs in the selected kernel backend.
    """
    gev, bev = _value(ge), _value(be)
    gshv, bshv = _value(gsh), _value(bsh)
    p, q = _accel.edge_injections_fwd(
        pack.fr, pack.to, gev, bev, gshv, bshv, pack.v2, pack.vv, pack.cs, pack.sn
    )

    def vjp(padj, qadj):
        return _accel.edge_injections_vjp(
            pack.fr, pack.to, gev, bev, pack.v2, pack.vv, pack.cs, pack.sn, padj, qadj
        )

    tape = _tape(ge, be, gsh, bsh)
    return tape.record("grid_injections", (p, q), (ge, be, gsh, bsh), vjp)
