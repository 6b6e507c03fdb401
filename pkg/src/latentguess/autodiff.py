"""Minimal reverse-mode automatic differentiation over dense numpy arrays.

Just enough machinery to train the autoencoder: affine maps, leaky
rectifier, tanh, softmax (+ fused cross-entropy), log, square, reductions,
pairwise squared distances, concat and reshape. Tensors record their
parents and a backward closure; `backward` walks the implicit tape in
reverse topological order exactly once per node.

Storage defaults to float32; reductions accumulate in float64. No dynamic
shapes, no higher-order derivatives.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "_backward", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        self.data = np.asarray(data)
        self.grad = None
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = g.astype(self.data.dtype, copy=True)
        else:
            self.grad += g


def _shape_error(op: str, *shapes) -> ValueError:
    return ValueError(f"{op}: incompatible shapes {' and '.join(map(str, shapes))}")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, extent in enumerate(shape):
        if extent == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def constant(data) -> Tensor:
    return Tensor(np.asarray(data))


def parameter(data, name=None) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True, name=name)


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data + b.data
    except ValueError:
        raise _shape_error("add", a.shape, b.shape) from None

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, parents=(a, b), backward=bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data - b.data
    except ValueError:
        raise _shape_error("sub", a.shape, b.shape) from None

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    return Tensor(out_data, parents=(a, b), backward=bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data * b.data
    except ValueError:
        raise _shape_error("mul", a.shape, b.shape) from None

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, parents=(a, b), backward=bwd)


def scale(a: Tensor, s: float) -> Tensor:
    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * s)

    return Tensor(a.data * s, parents=(a,), backward=bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor(out_data, parents=(a, b), backward=bwd)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    pos = a.data > 0
    out_data = np.where(pos, a.data, slope * a.data)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(np.where(pos, g, slope * g))

    return Tensor(out_data, parents=(a,), backward=bwd)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out_data * out_data))

    return Tensor(out_data, parents=(a,), backward=bwd)


def log(a: Tensor) -> Tensor:
    out_data = np.log(a.data)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g / a.data)

    return Tensor(out_data, parents=(a,), backward=bwd)


def square(a: Tensor) -> Tensor:
    out_data = a.data * a.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(2.0 * g * a.data)

    return Tensor(out_data, parents=(a,), backward=bwd)


def reciprocal(a: Tensor) -> Tensor:
    out_data = 1.0 / a.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(-g * out_data * out_data)

    return Tensor(out_data, parents=(a,), backward=bwd)


def _sum64(x: np.ndarray, axis=None):
    return x.sum(axis=axis, dtype=np.float64)


def tsum(a: Tensor, axis=None) -> Tensor:
    out_data = _sum64(a.data, axis=axis).astype(a.data.dtype)

    def bwd(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.data.shape))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape))

    return Tensor(out_data, parents=(a,), backward=bwd)


def tmean(a: Tensor, axis=None) -> Tensor:
    n = a.data.size if axis is None else a.data.shape[axis]
    out_data = (_sum64(a.data, axis=axis) / n).astype(a.data.dtype)

    def bwd(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accumulate(np.broadcast_to(g / n, a.data.shape))
        else:
            a._accumulate(np.broadcast_to(np.expand_dims(g, axis) / n, a.data.shape))

    return Tensor(out_data, parents=(a,), backward=bwd)


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return Tensor(out_data, parents=(a,), backward=bwd)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return Tensor(out_data, parents=tuple(tensors), backward=bwd)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max subtraction along `axis`)."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        if a.requires_grad:
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            a._accumulate(out_data * (g - dot))

    return Tensor(out_data, parents=(a,), backward=bwd)


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean cross-entropy (nats) of integer `targets` under softmax(logits).

    logits: [..., C]; targets: integer array of shape logits.shape[:-1].
    Fused for stability: loss = logsumexp(logits) - logits[target].
    """
    t = np.asarray(targets)
    if t.shape != logits.data.shape[:-1]:
        raise _shape_error("softmax_cross_entropy", logits.shape, t.shape)
    x = logits.data
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    z = e.sum(axis=-1, keepdims=True)
    logp = (x - m) - np.log(z)
    flat_lp = logp.reshape(-1, x.shape[-1])
    picked = flat_lp[np.arange(flat_lp.shape[0]), t.reshape(-1)]
    n = picked.size
    out_data = np.asarray(-_sum64(picked) / n, dtype=x.dtype)

    def bwd(g):
        if not logits.requires_grad:
            return
        p = e / z
        onehot = np.zeros_like(p.reshape(-1, x.shape[-1]))
        onehot[np.arange(n), t.reshape(-1)] = 1.0
        logits._accumulate((g / n) * (p - onehot.reshape(p.shape)))

    return Tensor(out_data, parents=(logits,), backward=bwd)


def softmax_cross_entropy_soft(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean cross-entropy of a soft target distribution under softmax(logits).

    logits, targets: [..., C]; every targets[...] row sums to 1.
    """
    t = np.asarray(targets)
    if t.shape != logits.data.shape:
        raise _shape_error("softmax_cross_entropy_soft", logits.shape, t.shape)
    x = logits.data
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    z = e.sum(axis=-1, keepdims=True)
    logp = (x - m) - np.log(z)
    n = x.size // x.shape[-1]
    out_data = np.asarray(-_sum64(t * logp) / n, dtype=x.dtype)

    def bwd(g):
        if not logits.requires_grad:
            return
        p = e / z
        logits._accumulate((g / n) * (p - t))

    return Tensor(out_data, parents=(logits,), backward=bwd)


def pairwise_sqdist(a: Tensor, b: Tensor) -> Tensor:
    """All-pairs squared Euclidean distances: out[i, j] = ||a_i - b_j||^2."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise _shape_error("pairwise_sqdist", a.shape, b.shape)
    diff = a.data[:, None, :] - b.data[None, :, :]
    out_data = np.einsum("ijk,ijk->ij", diff, diff)

    def bwd(g):
        if a.requires_grad:
            a._accumulate(2.0 * np.einsum("ij,ijk->ik", g, diff))
        if b.requires_grad:
            b._accumulate(-2.0 * np.einsum("ij,ijk->jk", g, diff))

    return Tensor(out_data, parents=(a, b), backward=bwd)


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; gradients land in .grad slots."""
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
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
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def gradients(loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss for every named parameter (zeros if unused)."""
    backward(loss)
    out = {}
    for name, p in params.items():
        out[name] = np.zeros_like(p.data) if p.grad is None else p.grad
    return out


class ParamStore:
    """Named parameters with Adam moment state."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.params:
            raise ValueError(f"duplicate parameter name: {name}")
        p = parameter(np.asarray(data, dtype=np.float32), name=name)
        self.params[name] = p
        self._m[name] = np.zeros_like(p.data)
        self._v[name] = np.zeros_like(p.data)
        return p

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def state_tensors(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}

    def load_tensors(self, tensors: dict[str, np.ndarray]):
        for name, p in self.params.items():
            if name not in tensors:
                raise KeyError(f"missing parameter: {name}")
            if tensors[name].shape != p.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {tensors[name].shape} vs {p.data.shape}"
                )
            p.data = tensors[name].astype(np.float32)
            self._m[name] = np.zeros_like(p.data)
            self._v[name] = np.zeros_like(p.data)


def adam_step(
    store: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update over every parameter in the store."""
    b1, b2 = betas
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in store.params.items():
        if name not in grads:
            raise KeyError(f"missing gradient for parameter: {name}")
        g = grads[name]
        m = store._m[name]
        v = store._v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
