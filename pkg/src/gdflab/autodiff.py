"""Minimal reverse-mode automatic differentiation over dense 2D float64 arrays.

Operations record themselves onto the active :class:`Tape` (entered with a
``with`` block).  Leaves may live outside any tape, which is how model
parameters persist across iterations while each iteration builds a fresh
graph::

    w = leaf(np.ones((2, 1)))
    with Tape() as tape:
        x = leaf(np.array([[1.0, 2.0]]), requires_grad=False)
        loss = sum_all(matmul(x, w))
        backward(tape, loss)
    w.grad  # [[1.], [2.]]
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Optional

import numpy as np

DEFAULT_STD_EPS = 1e-8

_ids = itertools.count()
_local = threading.local()


class AutodiffError(ValueError):
    """Raised on shape mismatches, domain violations and bad inputs."""


class Node:
    __slots__ = ("id", "value", "grad", "op", "parents", "requires_grad", "_backward")

    def __init__(
        self,
        value: np.ndarray,
        op: str = "leaf",
        parents: tuple["Node", ...] = (),
        requires_grad: bool = False,
        backward_fn: Optional[Callable[[np.ndarray], None]] = None,
    ):
        self.id = next(_ids)
        self.value = value
        # intermediate nodes get their grad buffer on first accumulation
        self.grad = np.zeros_like(value) if op == "leaf" else None
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self._backward = backward_fn

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        else:
            self.grad.fill(0.0)

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Node(id={self.id}, op={self.op!r}, shape={self.shape})"


class Tape:
    """Append-only record of the nodes produced inside a ``with`` block."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Tape":
        stack = _tape_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tape_stack().pop()

    def __len__(self) -> int:
        return len(self.nodes)


def _tape_stack() -> list[Tape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def _record(node: Node) -> Node:
    stack = _tape_stack()
    if not stack:
        raise AutodiffError("operations must run inside an active Tape")
    stack[-1].nodes.append(node)
    return node


def _as_matrix(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise AutodiffError(f"expected a 2D matrix, got {arr.ndim} dimensions")
    return arr


def leaf(value, requires_grad: bool = True) -> Node:
    """Create a parentless node.  The value is copied and must be finite."""
    arr = _as_matrix(value)
    if arr.size == 0:
        raise AutodiffError(f"empty matrix of shape {arr.shape} rejected")
    if not np.all(np.isfinite(arr)):
        raise AutodiffError("non-finite leaf value rejected")
    return Node(arr, requires_grad=requires_grad)


def constant(value) -> Node:
    return leaf(value, requires_grad=False)


def _unary(op: str, a: Node, value: np.ndarray, local_grad: Callable[[np.ndarray], np.ndarray]) -> Node:
    out = Node(value, op=op, parents=(a,), requires_grad=a.requires_grad)
    if a.requires_grad:
        def _bw(g: np.ndarray) -> None:
            a.accumulate(local_grad(g))
        out._backward = _bw
    return _record(out)


def _same_shape(op: str, a: Node, b: Node) -> None:
    if a.shape != b.shape:
        raise AutodiffError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[0]:
        raise AutodiffError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    out = Node(a.value @ b.value, op="matmul", parents=(a, b),
               requires_grad=a.requires_grad or b.requires_grad)

    def _bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g @ b.value.T)
        if b.requires_grad:
            b.accumulate(a.value.T @ g)
    out._backward = _bw
    return _record(out)


def add(a: Node, b: Node) -> Node:
    _same_shape("add", a, b)
    out = Node(a.value + b.value, op="add", parents=(a, b),
               requires_grad=a.requires_grad or b.requires_grad)

    def _bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g)
    out._backward = _bw
    return _record(out)


def sub(a: Node, b: Node) -> Node:
    _same_shape("sub", a, b)
    out = Node(a.value - b.value, op="sub", parents=(a, b),
               requires_grad=a.requires_grad or b.requires_grad)

    def _bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(-g)
    out._backward = _bw
    return _record(out)


def add_bias(a: Node, bias: Node) -> Node:
    """Row-broadcast add of a (1, n) bias onto a (b, n) matrix."""
    if bias.shape[0] != 1 or bias.shape[1] != a.shape[1]:
        raise AutodiffError(f"add_bias: bias {bias.shape} incompatible with {a.shape}")
    out = Node(a.value + bias.value, op="add_bias", parents=(a, bias),
               requires_grad=a.requires_grad or bias.requires_grad)

    def _bw(g: np.ndarray) -> None:
        if a.requires_grad:
            a.accumulate(g)
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=0, keepdims=True))
    out._backward = _bw
    return _record(out)


def relu(a: Node) -> Node:
    # subgradient at 0 is 0
    mask = a.value > 0
    return _unary("relu", a, np.maximum(a.value, 0.0), lambda g: g * mask)


def sigmoid(a: Node) -> Node:
    x = a.value
    # split by sign so neither branch overflows
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    s[~pos] = e / (1.0 + e)
    return _unary("sigmoid", a, s, lambda g: g * s * (1.0 - s))


def log(a: Node) -> Node:
    if np.any(a.value <= 0):
        raise AutodiffError("log: input must be strictly positive")
    x = a.value
    return _unary("log", a, np.log(x), lambda g: g / x)


def neg(a: Node) -> Node:
    return _unary("neg", a, -a.value, lambda g: -g)


def scale(a: Node, c: float) -> Node:
    c = float(c)
    return _unary("scale", a, a.value * c, lambda g: g * c)


def abs(a: Node) -> Node:  # noqa: A001 - mirrors the primitive's name
    sign = np.sign(a.value)
    return _unary("abs", a, np.abs(a.value), lambda g: g * sign)


def sqrt(a: Node) -> Node:
    if np.any(a.value < 0):
        raise AutodiffError("sqrt: input must be non-negative")
    r = np.sqrt(a.value)

    def _local(g: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.where(r > 0, 0.5 / r, np.inf)
        return g * d
    return _unary("sqrt", a, r, _local)


def clip(a: Node, lo: float, hi: float) -> Node:
    """Clamp into [lo, hi]; gradient passes only where the input is inside."""
    inside = (a.value >= lo) & (a.value <= hi)
    return _unary("clip", a, np.clip(a.value, lo, hi), lambda g: g * inside)


def one_minus(a: Node) -> Node:
    return _unary("one_minus", a, 1.0 - a.value, lambda g: -g)


def mean_rows(a: Node) -> Node:
    b = a.shape[0]
    return _unary("mean_rows", a, a.value.mean(axis=0, keepdims=True),
                  lambda g: np.broadcast_to(g / b, a.shape))


def sum_all(a: Node) -> Node:
    return _unary("sum_all", a, np.array([[a.value.sum()]]),
                  lambda g: np.broadcast_to(g, a.shape))


def mean_all(a: Node) -> Node:
    return scale(sum_all(a), 1.0 / a.value.size)


def std_rows(a: Node, epsilon: float = DEFAULT_STD_EPS) -> Node:
    """Per-column population std, ``sqrt(mean((x - mean)**2) + epsilon)``."""
    b = a.shape[0]
    if b < 2:
        raise AutodiffError(f"std_rows needs at least 2 rows, got {b}")
    centered = a.value - a.value.mean(axis=0, keepdims=True)
    var = (centered ** 2).mean(axis=0, keepdims=True)
    sd = np.sqrt(var + epsilon)

    def _local(g: np.ndarray) -> np.ndarray:
        # d sd / d x_i = (x_i - mean) / (b * sd); the mean's own dependence cancels
        return g * centered / (b * sd)
    return _unary("std_rows", a, sd, _local)


def backward(tape: Tape, root: Node) -> None:
    """Accumulate d(root)/d(leaf) into the ``grad`` of every requires_grad leaf."""
    if root.shape != (1, 1):
        raise AutodiffError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return
    root.accumulate(np.ones((1, 1)))
    for node in reversed(tape.nodes):
        if node._backward is not None and node.requires_grad:
            node._backward(node.grad)
