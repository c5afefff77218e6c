"""Reverse-mode autodiff over float64 numpy arrays.

Small deliberately: exactly the operations the encoders need, each with a
hand-derived backward. Tensors are immutable values after creation; only
``grad`` buffers mutate, and only during :func:`backward`.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "tensor",
    "constant",
    "add",
    "sub",
    "mul",
    "div",
    "matmul",
    "concat",
    "rows",
    "reshape",
    "transpose",
    "sum_",
    "mean_rows",
    "relu",
    "leaky_relu",
    "elu",
    "sigmoid",
    "tanh",
    "exp",
    "sqrt",
    "masked_softmax",
    "backward",
]


class Tensor:
    """A float64 array plus the tape hooks needed for backpropagation."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(
        self,
        data: np.ndarray,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward_fn: Callable[[np.ndarray], None] | None = None,
    ):
        self.data = data
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward_fn

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    # operator sugar used throughout the layers
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(constant(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    arr = np.asarray(data, dtype=np.float64)
    return Tensor(arr, requires_grad=requires_grad)


def constant(data) -> Tensor:
    return tensor(data, requires_grad=False)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` along broadcast axes."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _make(data, parents, backward_fn) -> Tensor:
    requires = any(p.requires_grad for p in parents)
    return Tensor(
        data,
        requires_grad=requires,
        parents=parents if requires else (),
        backward_fn=backward_fn if requires else None,
    )


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g, b.shape))

    return _make(out_data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g, b.shape))

    return _make(out_data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(out_data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _make(out_data, (a, b), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _make(out_data, (a, b), bw)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(start, stop)
                _accum(p, g[tuple(index)])

    return _make(out_data, tuple(parts), bw)


def rows(a: Tensor, index) -> Tensor:
    """Gather rows by integer index (embedding lookup / row slicing)."""
    idx = np.asarray(index, dtype=np.intp)
    out_data = a.data[idx]

    def bw(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, idx, g)
            _accum(a, buf)

    return _make(out_data, (a,), bw)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def bw(g):
        if a.requires_grad:
            _accum(a, g.reshape(a.shape))

    return _make(out_data, (a,), bw)


def transpose(a: Tensor) -> Tensor:
    out_data = a.data.T

    def bw(g):
        if a.requires_grad:
            _accum(a, g.T)

    return _make(out_data, (a,), bw)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if a.requires_grad:
            if axis is None:
                _accum(a, np.broadcast_to(g, a.shape).copy())
            else:
                g_exp = g if keepdims else np.expand_dims(g, axis)
                _accum(a, np.broadcast_to(g_exp, a.shape).copy())

    return _make(out_data, (a,), bw)


def mean_rows(a: Tensor) -> Tensor:
    """Mean over axis 0, keeping a (1, d) shape."""
    n = a.shape[0]
    return mul(sum_(a, axis=0, keepdims=True), 1.0 / n)


def _unary(a: Tensor, out_data: np.ndarray, dfn) -> Tensor:
    def bw(g):
        if a.requires_grad:
            _accum(a, g * dfn())

    return _make(out_data, (a,), bw)


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    return _unary(a, np.maximum(a.data, 0.0), lambda: (a.data > 0).astype(np.float64))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    out = np.where(a.data > 0, a.data, slope * a.data)
    return _unary(a, out, lambda: np.where(a.data > 0, 1.0, slope))


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    ex = np.exp(np.minimum(a.data, 0.0))
    out = np.where(a.data > 0, a.data, alpha * (ex - 1.0))
    return _unary(a, out, lambda: np.where(a.data > 0, 1.0, alpha * ex))


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _unary(a, out, lambda: out * (1.0 - out))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _unary(a, out, lambda: 1.0 - out * out)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _unary(a, out, lambda: out)


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _unary(a, out, lambda: 0.5 / out)


def masked_softmax(scores: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; masked positions get exactly zero weight.

    ``mask`` is a boolean array broadcastable to ``scores`` where True marks
    positions that participate. Raises if any row is fully masked.
    """
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), scores.shape)
        if not mask.any(axis=-1).all():
            raise ValueError("softmax undefined: at least one row is fully masked")
        shifted = np.where(mask, scores.data, -np.inf)
    else:
        shifted = scores.data
    peak = shifted.max(axis=-1, keepdims=True)
    e = np.exp(shifted - peak)
    total = e.sum(axis=-1, keepdims=True)
    out = e / total

    def bw(g):
        if scores.requires_grad:
            inner = (g * out).sum(axis=-1, keepdims=True)
            _accum(scores, out * (g - inner))

    return _make(out, (scores,), bw)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.astype(np.float64, copy=True)
    else:
        t.grad += g


def backward(loss: Tensor) -> None:
    """Backpropagate from a scalar loss; accumulates into ``.grad`` buffers."""
    if loss.data.size != 1:
        raise ValueError(f"backward expects a scalar, got shape {loss.shape}")
    # iterative topological order (graphs exceed the recursion limit)
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
