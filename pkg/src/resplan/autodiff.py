"""Reverse-mode automatic differentiation on dense float64 arrays.

Tape-per-step: each forward pass builds a fresh graph of Tensor nodes and
``backward`` walks it once; nothing is retained between steps. A graph is
single-use and confined to one thread. Tensor data is immutable after the
op that produced it and safe to share read-only.

Every primitive checks its output for non-finite values and raises
NumericsError naming itself, so numerical failures surface at the op that
caused them rather than as a NaN loss many steps later.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericsError(RuntimeError):
    """A primitive produced a non-finite value."""


class Tensor:
    """Graph node: float64 payload plus the closure that backpropagates it."""

    __slots__ = ("data", "_parents", "_backward", "_op", "_param", "grad")

    def __init__(self, data, parents=(), backward=None, op="const", param=None):
        self.data = np.asarray(data, dtype=np.float64)
        self._parents = parents
        self._backward = backward
        self._op = op
        self._param = param
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def __add__(self, other):
        return add(self, _wrap(other))

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        return f"Tensor(op={self._op!r}, shape={self.data.shape})"


class Parameter:
    """Named trainable array with a same-shape gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def tensor(self) -> Tensor:
        """Fresh leaf node; backward accumulates into this parameter's grad."""
        return Tensor(self.value, op="param", param=self)

    @property
    def size(self) -> int:
        return self.value.size

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def constant(x) -> Tensor:
    return Tensor(x)


def _node(data: np.ndarray, parents, backward, op: str) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NumericsError(f"non-finite value produced by primitive '{op}'")
    return Tensor(data, parents=parents, backward=backward, op=op)


class _quiet(np.errstate):
    """Suppress numpy overflow warnings; the finite check raises instead."""

    def __init__(self):
        super().__init__(over="ignore", invalid="ignore")


def _accumulate(node: Tensor, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.zeros_like(node.data)
    node.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    with _quiet():
        out = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(out, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    with _quiet():
        out = a.data - b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _node(out, (a, b), backward, "sub")


def neg(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, -g)

    return _node(-a.data, (a,), backward, "neg")


def mul(a: Tensor, b: Tensor) -> Tensor:
    with _quiet():
        out = a.data * b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out, (a, b), backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward(g):
        _accumulate(a, g * c)

    with _quiet():
        out = a.data * c
    return _node(out, (a,), backward, "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    with _quiet():
        out = a.data @ b.data

    def backward(g):
        _accumulate(a, g @ b.data.T)
        _accumulate(b, a.data.T @ g)

    return _node(out, (a, b), backward, "matmul")


def transpose(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, g.T)

    return _node(a.data.T, (a,), backward, "transpose")


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _node(a.data.reshape(shape), (a,), backward, "reshape")


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = list(tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _node(out, tuple(tensors), backward, "concat")


def narrow(a: Tensor, axis: int, start: int, size: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, start + size)
    idx = tuple(idx)

    def backward(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        _accumulate(a, full)

    return _node(a.data[idx], (a,), backward, "narrow")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def backward(g):
        _accumulate(a, g * (1.0 - out * out))

    return _node(out, (a,), backward, "tanh")


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)

    def backward(g):
        _accumulate(a, g * (a.data > 0.0))

    return _node(out, (a,), backward, "relu")


def sigmoid(a: Tensor) -> Tensor:
    out = _sigmoid_np(a.data)

    def backward(g):
        _accumulate(a, g * out * (1.0 - out))

    return _node(out, (a,), backward, "sigmoid")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    out = _softmax_np(a.data, axis)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        _accumulate(a, out * (g - inner))

    return _node(out, (a,), backward, "softmax")


def abs_(a: Tensor) -> Tensor:
    # subgradient 0 at the kink
    def backward(g):
        _accumulate(a, g * np.sign(a.data))

    return _node(np.abs(a.data), (a,), backward, "abs")


def square(a: Tensor) -> Tensor:
    def backward(g):
        _accumulate(a, g * 2.0 * a.data)

    with _quiet():
        out = a.data * a.data
    return _node(out, (a,), backward, "square")


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    return _node(out, (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    out = a.data.mean(axis=axis, keepdims=keepdims)

    def backward(g):
        g = np.asarray(g) / count
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    return _node(out, (a,), backward, "mean")


def l1_distance(a: Tensor, b: Tensor) -> Tensor:
    """Sum of absolute componentwise differences."""
    return sum_(abs_(sub(a, b)))


def l2_distance(a: Tensor, b: Tensor) -> Tensor:
    """Sum of squared componentwise differences."""
    return sum_(square(sub(a, b)))


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Elementwise binary cross-entropy from logits (numerically stable)."""
    t = np.asarray(targets, dtype=np.float64)
    x = logits.data
    out = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))

    def backward(g):
        _accumulate(logits, g * (_sigmoid_np(x) - t))

    return _node(out, (logits,), backward, "bce_with_logits")


def softmax_cross_entropy(logits: Tensor, target_probs, axis: int = -1) -> Tensor:
    """Per-row cross-entropy -sum(y * log softmax(x)) from logits."""
    y = np.asarray(target_probs, dtype=np.float64)
    x = logits.data
    shifted = x - x.max(axis=axis, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    log_probs = shifted - log_z
    out = -(y * log_probs).sum(axis=axis)
    probs = np.exp(log_probs)

    def backward(g):
        _accumulate(logits, np.expand_dims(np.asarray(g), axis) * (probs - y))

    return _node(out, (logits,), backward, "softmax_cross_entropy")


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax_np(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# backward pass and gradient checking
# ---------------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Reverse-accumulate d(loss)/d(node) for every node reachable from loss.

    loss must be scalar. Parameter leaves accumulate into Parameter.grad.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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
    loss.grad = np.ones(())
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        if node._backward is not None:
            node._backward(g)
        if node._param is not None:
            node._param.grad += g


def eval_with_grad(fn, params, *inputs) -> float:
    """Zero grads, evaluate fn(*inputs) to a scalar Tensor, backpropagate.

    Returns the loss as a float; gradients are left in each Parameter.grad.
    """
    for p in params:
        p.zero_grad()
    out = fn(*inputs)
    if not isinstance(out, Tensor):
        raise TypeError("fn must return a Tensor")
    backward(out)
    return float(out.data)


@dataclass
class GradReport:
    """Max relative error between analytic and central-FD gradients.

    Relative error uses denominator max(|analytic|, |fd|, floor); the floor
    guards near-zero gradients, where the absolute error is reported at the
    floor scale instead.
    """

    per_parameter: dict[str, float]
    overall: float


def check_gradients(fn, params, *inputs, step: float = 1e-5, floor: float = 1e-4) -> GradReport:
    """Central finite differences (h=step) against eval_with_grad for each element."""
    params = list(params)
    eval_with_grad(fn, params, *inputs)
    analytic = {p.name: p.grad.copy() for p in params}

    def loss_only() -> float:
        out = fn(*inputs)
        return float(out.data)

    per_param: dict[str, float] = {}
    for p in params:
        worst = 0.0
        flat = p.value.reshape(-1)
        fd_grad = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = loss_only()
            flat[i] = orig - step
            lo = loss_only()
            flat[i] = orig
            fd_grad[i] = (hi - lo) / (2.0 * step)
        a = analytic[p.name].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(fd_grad)), floor)
        worst = float(np.max(np.abs(a - fd_grad) / denom)) if flat.size else 0.0
        per_param[p.name] = worst
    overall = max(per_param.values()) if per_param else 0.0
    return GradReport(per_parameter=per_param, overall=overall)


def affine(x: Tensor, w: Parameter, b: Parameter) -> Tensor:
    """x @ w + b with b broadcast over rows."""
    return add(matmul(x, w.tensor()), b.tensor())


def clip_grad_norm(params, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        total += float((p.grad * p.grad).sum())
    norm = total**0.5
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params:
            p.grad *= factor
    return norm


class Adam:
    """Adaptive-moment gradient descent over a fixed parameter list."""

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, clip_norm: float = 1.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self._m = [np.zeros_like(p.value) for p in self.params]
        self._v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        if self.clip_norm is not None:
            clip_grad_norm(self.params, self.clip_norm)
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            p.value -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
