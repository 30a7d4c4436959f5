"""Minimal reverse-mode differentiation engine, neural layers, and Adam."""

from .layers import MLP, DenseLayer, GraphMaskedLayer, GraphNet, glorot_uniform
from .optim import AdamState, adam_step
from .tape import ACTIVATIONS, NonFiniteValue, Tape, Var

__all__ = [
    "ACTIVATIONS",
    "AdamState",
    "DenseLayer",
    "GraphMaskedLayer",
    "GraphNet",
    "MLP",
    "NonFiniteValue",
    "Tape",
    "Var",
    "adam_step",
    "glorot_uniform",
]
