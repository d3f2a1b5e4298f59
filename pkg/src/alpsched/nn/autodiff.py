"""Reverse-mode automatic differentiation on dense float64 arrays.

Each operation returns a new `Tensor` that records its parents and a local
backward closure; the resulting operation graph is the tape.  `backward`
seeds the loss gradient and walks the tape once in reverse topological
order, accumulating gradients into every node's buffer.

Every produced value is checked for NaN/Inf (non-finite values raise
immediately rather than propagate).  Shapes are limited to rank <= 3;
broadcasting follows numpy but is only exercised for same-shape, scalar, and
bias-row patterns.
"""
from __future__ import annotations

import numpy as np


class NonFiniteError(FloatingPointError):
    """A tensor value or gradient became NaN or infinite."""


def _check_finite(data: np.ndarray, what: str) -> None:
    # sum() propagates NaN/Inf to a single scalar check; values at desk scale
    # cannot overflow the sum.
    if not np.isfinite(data.sum()):
        raise NonFiniteError(f"non-finite values in {what}")


class Tensor:
    """Dense float64 array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, name: str = ""):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 3:
            raise ValueError(f"rank {arr.ndim} tensor not supported (max 3)")
        _check_finite(arr, name or "tensor")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = tuple(_parents)
        self._backward = _backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, grad={self.requires_grad})"

    # operator sugar
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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted gradient back to the parent's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _make(data, parents, backward_fn, name="") -> Tensor:
    out = Tensor(data, _parents=parents, _backward=backward_fn, name=name)
    return out


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data**2), b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects rank-2 tensors, got {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _make(out_data, (a, b), backward_fn)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    out_data = np.where(mask, x.data, 0.0)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * mask)

    return _make(out_data, (x,), backward_fn)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out_data = 1.0 / (1.0 + np.exp(-x.data))

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * out_data * (1.0 - out_data))

    return _make(out_data, (x,), backward_fn)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out_data = np.tanh(x.data)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * (1.0 - out_data**2))

    return _make(out_data, (x,), backward_fn)


def exp(x) -> Tensor:
    x = as_tensor(x)
    out_data = np.exp(x.data)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * out_data)

    return _make(out_data, (x,), backward_fn)


def log(x) -> Tensor:
    x = as_tensor(x)
    out_data = np.log(x.data)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g / x.data)

    return _make(out_data, (x,), backward_fn)


def square(x) -> Tensor:
    x = as_tensor(x)
    out_data = x.data**2

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * 2.0 * x.data)

    return _make(out_data, (x,), backward_fn)


def clamp(x, lo: float, hi: float) -> Tensor:
    """Clip values to [lo, hi]; gradient flows only through unclipped entries."""
    x = as_tensor(x)
    out_data = np.clip(x.data, lo, hi)
    pass_mask = (x.data > lo) & (x.data < hi)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g * pass_mask)

    return _make(out_data, (x,), backward_fn)


def tsum(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.sum(axis=axis)

    def backward_fn(g):
        if x.requires_grad:
            if axis is None:
                x._accumulate(np.full_like(x.data, g))
            else:
                x._accumulate(np.expand_dims(g, axis) * np.ones_like(x.data))

    return _make(out_data, (x,), backward_fn)


def mean(x, axis: int | None = None) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else x.data.shape[axis]
    return mul(tsum(x, axis), 1.0 / count)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        moved = np.moveaxis(g, axis, 0)
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                t._accumulate(np.moveaxis(moved[lo:hi], 0, axis))

    return _make(out_data, tuple(tensors), backward_fn)


def take(x, idx) -> Tensor:
    """Basic slicing/indexing; the backward pass scatters into the source shape."""
    x = as_tensor(x)
    out_data = x.data[idx]

    def backward_fn(g):
        if x.requires_grad:
            scattered = np.zeros_like(x.data)
            np.add.at(scattered, idx, g)
            x._accumulate(scattered)

    return _make(out_data, (x,), backward_fn)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out_data = x.data.reshape(shape)

    def backward_fn(g):
        if x.requires_grad:
            x._accumulate(g.reshape(x.data.shape))

    return _make(out_data, (x,), backward_fn)


def softmax(x, scale: float = 1.0, axis: int = -1) -> Tensor:
    """Normalized exp(x * scale) along `axis`, computed shift-stably."""
    x = as_tensor(x)
    z = x.data * scale
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            x._accumulate(scale * out_data * (g - inner))

    return _make(out_data, (x,), backward_fn)


def masked_softmax(x, mask: np.ndarray, axis: int = -1) -> Tensor:
    """Row softmax restricted to positions where `mask` is nonzero.

    Fully masked rows produce all-zero outputs (empty neighborhoods mix
    nothing) and pass no gradient.
    """
    x = as_tensor(x)
    keep = np.asarray(mask, dtype=bool)
    z = np.where(keep, x.data, -np.inf)
    zmax = z.max(axis=axis, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.where(keep, np.exp(z - zmax), 0.0)
    total = e.sum(axis=axis, keepdims=True)
    out_data = np.divide(e, total, out=np.zeros_like(e), where=total > 0)

    def backward_fn(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=axis, keepdims=True)
            x._accumulate(out_data * (g - inner))

    return _make(out_data, (x,), backward_fn)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(node) into every reachable node's gradient buffer.

    The tape is visited exactly once per node, in reverse topological order;
    a non-finite gradient anywhere raises immediately.
    """
    if loss.data.ndim != 0:
        raise ValueError(f"backward expects a scalar loss, got shape {loss.shape}")
    order = _topological_order(loss)
    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(order):
        if node._backward is None or not node.requires_grad:
            continue
        node._backward(node.grad)
    # NaN/Inf cannot cancel on the way down, so checking the leaves catches any
    # non-finite intermediate gradient without per-node overhead.
    for node in order:
        if node._backward is None and node.requires_grad and node.grad is not None:
            _check_finite(node.grad, f"gradient of {node.name or 'tensor'}")
