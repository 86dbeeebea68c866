"""Fully connected networks, Glorot initialization and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import autodiff as ad
from .autodiff import Node


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: Literal["relu"] = "relu"
    output_activation: Literal["none", "sigmoid"] = "none"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        if any(s <= 0 for s in sizes):
            raise ValueError(f"layer sizes must be positive: {sizes}")
        if self.hidden_activation != "relu":
            raise ValueError(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("none", "sigmoid"):
            raise ValueError(f"unsupported output activation {self.output_activation!r}")

    def to_dict(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "hidden_activation": self.hidden_activation,
            "output_activation": self.output_activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(tuple(d["layer_sizes"]), d.get("hidden_activation", "relu"),
                   d.get("output_activation", "none"))


def generator_spec(noise_dim: int = 256, hidden: int = 128, out_dim: int = 2) -> MlpSpec:
    return MlpSpec((noise_dim, hidden, hidden, out_dim), output_activation="none")


def discriminator_spec(in_dim: int = 2, hidden: int = 128) -> MlpSpec:
    return MlpSpec((in_dim, hidden, hidden, 1), output_activation="sigmoid")


@dataclass
class Params:
    """Weights and bias rows of one MLP, as requires_grad leaves."""

    weights: list[Node]
    biases: list[Node]

    def __iter__(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def named(self) -> list[tuple[str, Node]]:
        out = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out += [(f"layer{i}.weight", w), (f"layer{i}.bias", b)]
        return out

    def frozen(self) -> "Params":
        """Constant views sharing the same arrays; gradients do not flow into them."""
        def const(n: Node) -> Node:
            c = Node(n.value, requires_grad=False)
            return c
        return Params([const(w) for w in self.weights], [const(b) for b in self.biases])

    def zero_grad(self) -> None:
        for p in self:
            p.zero_grad()

    def arrays(self) -> list[np.ndarray]:
        return [p.value for p in self]


def init_params(spec: MlpSpec, rng: np.random.Generator) -> Params:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(ad.leaf(rng.uniform(-limit, limit, size=(fan_in, fan_out))))
        biases.append(ad.leaf(np.zeros((1, fan_out))))
    return Params(weights, biases)


def forward(spec: MlpSpec, params: Params, x: Node) -> Node:
    if x.shape[1] != spec.layer_sizes[0]:
        raise ValueError(f"input has {x.shape[1]} columns, network expects {spec.layer_sizes[0]}")
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = ad.add_bias(ad.matmul(h, w), b)
        if i < last:
            h = ad.relu(h)
    if spec.output_activation == "sigmoid":
        h = ad.sigmoid(h)
    return h


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Params, lr: float, beta1: float = 0.5,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(lr, beta1, beta2, eps, 0,
                   [np.zeros_like(p.value) for p in params],
                   [np.zeros_like(p.value) for p in params])


def adam_step(state: AdamState, params: Params) -> None:
    """Bias-corrected Adam update in place, then zero the gradients."""
    named = params.named()
    for name, p in named:
        if not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient in parameter {name}")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for (_, p), m, v in zip(named, state.m, state.v):
        g = p.grad
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.grad.fill(0.0)
