"""Reverse-mode autodiff over numpy arrays.

A forward evaluation builds a graph of ``Node`` objects; ``backward`` walks it
in reverse topological order from a scalar loss and accumulates gradients into
``Node.grad`` and, for dense layers, into the owning network's flat gradient
buffer.  Gradients on parameters persist until ``zero_grad`` so one tape per
mini-batch plus an optimizer step is the whole training loop.

Nodes whose subgraph touches neither a trainable network nor a gradient leaf
carry ``needs_grad=False`` and are skipped entirely during backward.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .backend import kernels as K
from .errors import DimensionError


class Node:
    __slots__ = ("value", "grad", "parents", "backward_fn", "needs_grad")

    def __init__(
        self,
        value: np.ndarray,
        parents: tuple["Node", ...] = (),
        backward_fn: Callable[[np.ndarray], None] | None = None,
        needs_grad: bool = False,
    ):
        self.value = value
        self.grad: np.ndarray | None = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.needs_grad = needs_grad

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g


def constant(value) -> Node:
    return Node(np.asarray(value, dtype=np.float64))


def leaf(value) -> Node:
    """A differentiable input; its gradient is available after backward."""
    return Node(np.asarray(value, dtype=np.float64), needs_grad=True)


def _as_node(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def backward(loss: Node) -> None:
    """Reverse-accumulate d(loss)/d(node) for the graph below a scalar loss."""
    if loss.value.size != 1:
        raise DimensionError(
            f"backward needs a scalar loss, got shape {loss.value.shape}"
        )
    order: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited or not node.needs_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


def dense(x: Node, net, layer: int, act: int, slope: float) -> Node:
    """Fused affine+activation layer reading weights from ``net``."""
    w = net.weight(layer)
    b = net.bias(layer)
    xv = x.value
    squeeze = xv.ndim == 1
    if squeeze:
        xv = xv[None, :]
    if xv.shape[1] != w.shape[0]:
        raise DimensionError(
            f"layer {layer} expects input width {w.shape[0]}, got {xv.shape[1]}"
        )
    pre, out = K.dense_forward(xv, w, b, act, slope)
    needs = x.needs_grad or net.trainable
    if not needs:
        return Node(out[0] if squeeze else out)

    def backward_fn(dout: np.ndarray) -> None:
        d = dout[None, :] if squeeze else dout
        dx, dw, db = K.dense_backward(d, xv, w, pre, act, slope)
        if net.trainable:
            net.weight_grad(layer)[...] += dw
            net.bias_grad(layer)[...] += db
        if x.needs_grad:
            x.accumulate(dx[0] if squeeze else dx)

    return Node(out[0] if squeeze else out, (x,), backward_fn, True)


def _binary(a: Node, b: Node, value, da, db) -> Node:
    needs = a.needs_grad or b.needs_grad

    def backward_fn(g: np.ndarray) -> None:
        if a.needs_grad:
            a.accumulate(da(g))
        if b.needs_grad:
            b.accumulate(db(g))

    return Node(value, (a, b), backward_fn if needs else None, needs)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    return _binary(
        a, b, a.value + b.value,
        lambda g: _unbroadcast(g, a.value.shape),
        lambda g: _unbroadcast(g, b.value.shape),
    )


def sub(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    return _binary(
        a, b, a.value - b.value,
        lambda g: _unbroadcast(g, a.value.shape),
        lambda g: _unbroadcast(-g, b.value.shape),
    )


def mul(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    return _binary(
        a, b, a.value * b.value,
        lambda g: _unbroadcast(g * b.value, a.value.shape),
        lambda g: _unbroadcast(g * a.value, b.value.shape),
    )


def matmul(a, b) -> Node:
    a, b = _as_node(a), _as_node(b)
    return _binary(
        a, b, a.value @ b.value,
        lambda g: g @ b.value.T,
        lambda g: a.value.T @ g,
    )


def transpose(a: Node) -> Node:
    def backward_fn(g: np.ndarray) -> None:
        a.accumulate(g.T)

    return Node(a.value.T, (a,), backward_fn if a.needs_grad else None, a.needs_grad)


def reshape(a: Node, shape) -> Node:
    old = a.value.shape

    def backward_fn(g: np.ndarray) -> None:
        a.accumulate(g.reshape(old))

    return Node(
        a.value.reshape(shape), (a,), backward_fn if a.needs_grad else None, a.needs_grad
    )


def concat_cols(parts: Iterable[Node]) -> Node:
    parts = [_as_node(p) for p in parts]
    widths = [p.value.shape[1] for p in parts]
    needs = any(p.needs_grad for p in parts)

    def backward_fn(g: np.ndarray) -> None:
        off = 0
        for p, w in zip(parts, widths):
            if p.needs_grad:
                p.accumulate(g[:, off:off + w])
            off += w

    return Node(
        np.concatenate([p.value for p in parts], axis=1),
        tuple(parts),
        backward_fn if needs else None,
        needs,
    )


def sum_axis1(a: Node) -> Node:
    def backward_fn(g: np.ndarray) -> None:
        a.accumulate(np.repeat(g[:, None], a.value.shape[1], axis=1))

    return Node(
        a.value.sum(axis=1), (a,), backward_fn if a.needs_grad else None, a.needs_grad
    )


def sqrt(a: Node) -> Node:
    """Elementwise square root; the subgradient at 0 is taken as 0."""
    root = np.sqrt(a.value)

    def backward_fn(g: np.ndarray) -> None:
        denom = 2.0 * root
        a.accumulate(np.where(denom > 0.0, g / np.where(denom > 0.0, denom, 1.0), 0.0))

    return Node(root, (a,), backward_fn if a.needs_grad else None, a.needs_grad)


def mean_all(a: Node) -> Node:
    n = a.value.size

    def backward_fn(g: np.ndarray) -> None:
        a.accumulate(np.full_like(a.value, float(g) / n))

    return Node(
        np.asarray(a.value.mean()), (a,),
        backward_fn if a.needs_grad else None, a.needs_grad,
    )


def sum_all(a: Node) -> Node:
    def backward_fn(g: np.ndarray) -> None:
        a.accumulate(np.full_like(a.value, float(g)))

    return Node(
        np.asarray(a.value.sum()), (a,),
        backward_fn if a.needs_grad else None, a.needs_grad,
    )


def clip(a: Node, lo: float, hi: float) -> Node:
    """Clamp; gradient passes only where the input is inside [lo, hi]."""
    inside = (a.value >= lo) & (a.value <= hi)

    def backward_fn(g: np.ndarray) -> None:
        a.accumulate(np.where(inside, g, 0.0))

    return Node(
        np.clip(a.value, lo, hi), (a,),
        backward_fn if a.needs_grad else None, a.needs_grad,
    )
