"""Neural layers: fully connected stacks and graph-masked stacks.

Parameters live in plain numpy arrays owned by the layer objects; a forward
pass takes tape Vars for exactly those arrays (in `param_arrays()` order) so
the optimizer, checkpointing, and finite-difference checks all see one flat,
named parameter layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tape as T


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _activation(name: str):
    try:
        return T.ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


@dataclass
class DenseLayer:
    weights: np.ndarray
    biases: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[1],):
            raise ValueError("inconsistent dense layer dimensions")
        _activation(self.activation)

    def forward(self, x, w=None, b=None):
        """x: (B, fan_in) Var or array; w/b default to the stored constants."""
        h = T.add(T.matmul(x, self.weights if w is None else w), self.biases if b is None else b)
        return _activation(self.activation)(h)


@dataclass
class GraphMaskedLayer:
    """Node-local transform plus a neighbor aggregation restricted to an
    adjacency mask: out_i = act(x_i W_self + (sum_{j in N(i)} x_j) W_nbr + b)."""

    w_self: np.ndarray
    w_nbr: np.ndarray
    biases: np.ndarray
    mask: np.ndarray  # (n, n) 0/1, zero diagonal
    activation: str = "identity"

    def __post_init__(self):
        if self.w_self.shape != self.w_nbr.shape:
            raise ValueError("w_self and w_nbr must have equal shape")
        if self.biases.shape != (self.w_self.shape[1],):
            raise ValueError("bias width mismatch")
        if self.mask.ndim != 2 or self.mask.shape[0] != self.mask.shape[1]:
            raise ValueError("mask must be square")
        _activation(self.activation)

    def forward(self, x, w_self=None, w_nbr=None, b=None):
        """x: (B, n, f) Var or array."""
        own = T.linear_nodes(x, self.w_self if w_self is None else w_self)
        agg = T.linear_nodes(T.mix_nodes(self.mask, x), self.w_nbr if w_nbr is None else w_nbr)
        h = T.add(T.add(own, agg), self.biases if b is None else b)
        return _activation(self.activation)(h)


@dataclass
class MLP:
    """Dense stack; hidden layers share one activation, output is linear."""

    layers: list[DenseLayer]

    @staticmethod
    def build(sizes: list[int], activation: str, rng: np.random.Generator) -> "MLP":
        layers = []
        for k in range(len(sizes) - 1):
            act = activation if k < len(sizes) - 2 else "identity"
            layers.append(
                DenseLayer(
                    weights=glorot_uniform(rng, sizes[k], sizes[k + 1]),
                    biases=np.zeros(sizes[k + 1]),
                    activation=act,
                )
            )
        return MLP(layers=layers)

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.biases])
        return out

    def set_params(self, arrays: list[np.ndarray]) -> None:
        expect = self.param_arrays()
        if len(arrays) != len(expect):
            raise ValueError("parameter count mismatch")
        i = 0
        for layer in self.layers:
            layer.weights = np.asarray(arrays[i], dtype=float)
            layer.biases = np.asarray(arrays[i + 1], dtype=float)
            i += 2

    def section_names(self) -> list[str]:
        names = []
        for k in range(len(self.layers)):
            names.extend([f"w{k}", f"b{k}"])
        return names

    def forward(self, x, param_vars=None):
        h = x
        for k, layer in enumerate(self.layers):
            if param_vars is None:
                h = layer.forward(h)
            else:
                h = layer.forward(h, w=param_vars[2 * k], b=param_vars[2 * k + 1])
        return h


@dataclass
class GraphNet:
    """Graph-masked stack over a fixed node set; output is linear."""

    layers: list[GraphMaskedLayer]

    @staticmethod
    def build(
        mask: np.ndarray,
        feature_sizes: list[int],
        activation: str,
        rng: np.random.Generator,
    ) -> "GraphNet":
        layers = []
        for k in range(len(feature_sizes) - 1):
            act = activation if k < len(feature_sizes) - 2 else "identity"
            fi, fo = feature_sizes[k], feature_sizes[k + 1]
            layers.append(
                GraphMaskedLayer(
                    w_self=glorot_uniform(rng, fi, fo),
                    w_nbr=glorot_uniform(rng, fi, fo),
                    biases=np.zeros(fo),
                    mask=mask,
                    activation=act,
                )
            )
        return GraphNet(layers=layers)

    def param_arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.w_self, layer.w_nbr, layer.biases])
        return out

    def set_params(self, arrays: list[np.ndarray]) -> None:
        expect = self.param_arrays()
        if len(arrays) != len(expect):
            raise ValueError("parameter count mismatch")
        i = 0
        for layer in self.layers:
            layer.w_self = np.asarray(arrays[i], dtype=float)
            layer.w_nbr = np.asarray(arrays[i + 1], dtype=float)
            layer.biases = np.asarray(arrays[i + 2], dtype=float)
            i += 3

    def section_names(self) -> list[str]:
        names = []
        for k in range(len(self.layers)):
            names.extend([f"gself{k}", f"gnbr{k}", f"gbias{k}"])
        return names

    def forward(self, x, param_vars=None):
        h = x
        for k, layer in enumerate(self.layers):
            if param_vars is None:
                h = layer.forward(h)
            else:
                h = layer.forward(
                    h,
                    w_self=param_vars[3 * k],
                    w_nbr=param_vars[3 * k + 1],
                    b=param_vars[3 * k + 2],
                )
        return h
