"""Reverse-mode automatic differentiation over dense float64 tensors.

Define-by-run: every op records its parents and a backward closure, and the
graph is rebuilt on each training step. The op set is exactly what the model
needs; elementwise-heavy ops (gelu, layernorm, softmax) delegate to the
kernel backend in :mod:`trunklm.kernels`.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels


class Tensor:
    """A node in the computation graph wrapping a float64 ndarray.

    Leaf tensors with ``requires_grad=True`` are parameters; ops produce
    interior nodes whose ``_backward`` distributes the output gradient to
    the parents.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None,
        name: str = "",
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad}{tag})"

    # Operator sugar; everything routes through the module-level ops.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError("item() on non-scalar tensor")
        return float(self.data.reshape(()))


def parameter(data, name: str = "") -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def constant(data) -> Tensor:
    return Tensor(data)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, parents=parents if req else (), backward=backward if req else None)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient g down to the given (broadcast-source) shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise / linear algebra
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    out = a.data * c

    def bw(g):
        return (g * c,)

    return _make(out, (a,), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product with NumPy broadcasting on leading axes."""
    out = np.matmul(a.data, b.data)

    def bw(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(out, (a, b), bw)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def bw(g):
        return (g.reshape(a.shape),)

    return _make(out, (a,), bw)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = np.ascontiguousarray(a.data.transpose(axes))
    inv = np.argsort(axes)

    def bw(g):
        return (g.transpose(inv),)

    return _make(out, (a,), bw)


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=axis))

    return _make(out, tuple(parts), bw)


def stop_gradient(a: Tensor) -> Tensor:
    return Tensor(a.data.copy())


# ---------------------------------------------------------------------------
# gathers
# ---------------------------------------------------------------------------


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """table (V, D), ids int array (...,) -> (..., D)."""
    ids = np.asarray(ids)
    out = table.data[ids]

    def bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        return (gt,)

    return _make(out, (table,), bw)


def gather_positions(x: Tensor, batch_idx: np.ndarray, pos_idx: np.ndarray) -> Tensor:
    """x (B, T, D) -> (N, D) rows at (batch_idx[i], pos_idx[i])."""
    out = x.data[batch_idx, pos_idx]

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (batch_idx, pos_idx), g)
        return (gx,)

    return _make(out, (x,), bw)


def rel_gather(x: Tensor, idx: np.ndarray) -> Tensor:
    """x (B, H, Q, N), idx (Q, K) -> (B, H, Q, K); out[..., q, k] = x[..., q, idx[q, k]].

    Used to pick per-(query, key) relative-distance scores out of the
    all-distances score tensor."""
    q_ar = np.arange(idx.shape[0])[:, None]
    out = x.data[:, :, q_ar, idx]

    def bw(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (slice(None), slice(None), q_ar, idx), g)
        return (gx,)

    return _make(out, (x,), bw)


# ---------------------------------------------------------------------------
# reductions, masking, nonlinearity
# ---------------------------------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _make(out, (a,), bw)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def where_mask(a: Tensor, mask: np.ndarray, fill: float = -np.inf) -> Tensor:
    """Replace entries where mask is False by `fill` (mask broadcasts)."""
    mask_b = np.broadcast_to(mask, a.shape)
    out = np.where(mask_b, a.data, fill)

    def bw(g):
        return (np.where(mask_b, g, 0.0),)

    return _make(out, (a,), bw)


def gelu(a: Tensor) -> Tensor:
    flat = np.ascontiguousarray(a.data.reshape(-1))
    out = np.asarray(kernels.gelu_forward(flat)).reshape(a.shape)

    def bw(g):
        dg = np.ascontiguousarray(g.reshape(-1))
        return (np.asarray(kernels.gelu_backward(flat, dg)).reshape(a.shape),)

    return _make(out, (a,), bw)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    if axis not in (-1, a.data.ndim - 1):
        raise ValueError("softmax only supports the last axis")
    rows = np.ascontiguousarray(a.data.reshape(-1, a.shape[-1]))
    y = np.asarray(kernels.softmax_rows(rows)).reshape(a.shape)

    def bw(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return ((g - dot) * y,)

    return _make(y, (a,), bw)


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    rows = np.ascontiguousarray(x.data.reshape(-1, d))
    y, mean, rstd = kernels.layernorm_forward(rows, np.ascontiguousarray(gamma.data), np.ascontiguousarray(beta.data), eps)

    def bw(g):
        grows = np.ascontiguousarray(g.reshape(-1, d))
        dx, dgamma, dbeta = kernels.layernorm_backward(grows, rows, np.ascontiguousarray(gamma.data), mean, rstd)
        return np.asarray(dx).reshape(x.shape), np.asarray(dgamma), np.asarray(dbeta)

    return _make(np.asarray(y).reshape(x.shape), (x, gamma, beta), bw)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout. p == 0 returns the input node unchanged so that
    zero-dropout forwards are bit-deterministic and consume no randomness."""
    if p == 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability out of range: {p}")
    if rng is None:
        raise ValueError("dropout with p > 0 needs an rng")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)

    def bw(g):
        return (g * keep,)

    return _make(a.data * keep, (a,), bw)


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-probability of integer targets. logits (N, V)."""
    targets = np.asarray(targets)
    if logits.data.ndim != 2:
        raise ValueError("logits must be 2-D (rows, classes)")
    n, v = logits.shape
    if targets.shape != (n,):
        raise ValueError(f"targets shape {targets.shape} != ({n},)")
    if targets.size and (targets.min() < 0 or targets.max() >= v):
        raise ValueError("target id out of range")
    x = logits.data
    m = x.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(x - m).sum(axis=1, keepdims=True))
    logp = x - lse
    loss = -logp[np.arange(n), targets].mean()

    def bw(g):
        p = np.exp(logp)
        p[np.arange(n), targets] -= 1.0
        return (p * (float(g) / n),)

    return _make(loss, (logits,), bw)


# ---------------------------------------------------------------------------
# backward driver
# ---------------------------------------------------------------------------


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> None:
    """Populate .grad on every tensor reachable from `loss`.

    If `params` is given they are zero-initialized first, so parameters the
    loss does not depend on end up with an all-zero gradient.
    """
    if loss.data.size != 1:
        raise ValueError("backward requires a scalar loss")
    if params is not None:
        for p in params:
            p.zero_grad()
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    if loss.grad is None:
        loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for p, g in zip(node._parents, grads):
            if g is None or not p.requires_grad:
                continue
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            p.grad += g
