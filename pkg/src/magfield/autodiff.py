"""Reverse-mode parameter gradients over jet-valued computations.

The forward computation propagates :class:`~magfield.jets.Jet` triples
(value, spatial gradient, Laplacian) through network layers, so spatial
derivatives needed by PDE residuals come out of the forward pass exactly.
This module treats that extended forward computation as the primal program
and reverse-accumulates d(loss)/d(parameter) through it: each node carries
an adjoint for every jet component it exposes, and each op knows how to push
those adjoints back to its parents.

A node's payload is either a ``Jet`` (spatially differentiated quantities)
or a plain ndarray (parameters, extracted components, loss algebra).  The
op set is deliberately small: affine layers, tanh, jet-component extraction,
and the elementwise/reduction algebra needed to assemble the losses.

Cost is a small constant factor of one forward evaluation: every op's
backward is a handful of matmuls/elementwise kernels mirroring its forward,
and adjoints are only pushed into nodes that can reach a parameter.
Reductions use fixed summation order, so gradients are reproducible
bit-for-bit for identical inputs on one platform.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericsError
from .jets import Jet, _exp1


class Node:
    """One value in the computation graph: a Jet or a plain array."""

    __slots__ = ("jet", "val", "bar", "bar_v", "bar_g", "bar_l",
                 "needs_grad", "_parents", "_backward")

    def __init__(self, payload, parents=(), needs_grad=None):
        if isinstance(payload, Jet):
            self.jet, self.val = payload, None
        else:
            self.jet, self.val = None, np.asarray(payload, dtype=float)
        self.bar = None        # adjoint of plain value
        self.bar_v = None      # adjoints of jet components
        self.bar_g = None
        self.bar_l = None
        if needs_grad is None:
            needs_grad = any(p.needs_grad for p in parents)
        self.needs_grad = needs_grad
        self._parents = parents
        self._backward = None

    # -- adjoint accumulation (None means "not yet touched") -------------
    def _acc(self, attr, delta):
        cur = getattr(self, attr)
        setattr(self, attr, delta if cur is None else cur + delta)

    # -- graph construction: plain-array algebra --------------------------
    def _plain(self):
        if self.val is None:
            raise TypeError("expected a plain node, got a jet node")
        return self.val

    def __add__(self, other):
        if isinstance(other, Node):
            out = Node(self._plain() + other._plain(), (self, other))

            def back():
                if self.needs_grad:
                    self._acc("bar", out.bar)
                if other.needs_grad:
                    other._acc("bar", out.bar)
        else:
            out = Node(self._plain() + other, (self,))

            def back():
                self._acc("bar", out.bar)
        out._backward = back
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        out = Node(-self._plain(), (self,))

        def back():
            self._acc("bar", -out.bar)
        out._backward = back
        return out

    def __mul__(self, other):
        if isinstance(other, Node):
            a, b = self._plain(), other._plain()
            if a.shape != b.shape:
                raise ValueError(f"elementwise mul shape mismatch: {a.shape} vs {b.shape}")
            out = Node(a * b, (self, other))

            def back():
                if self.needs_grad:
                    self._acc("bar", out.bar * b)
                if other.needs_grad:
                    other._acc("bar", out.bar * a)
        else:
            c = float(other)
            out = Node(self._plain() * c, (self,))

            def back():
                self._acc("bar", out.bar * c)
        out._backward = back
        return out

    __rmul__ = __mul__

    def exp(self):
        e = np.exp(self._plain())
        out = Node(e, (self,))

        def back():
            self._acc("bar", out.bar * e)
        out._backward = back
        return out

    def log(self):
        v = self._plain()
        out = Node(np.log(v), (self,))

        def back():
            self._acc("bar", out.bar / v)
        out._backward = back
        return out

    def absval(self):
        """|x| with subgradient sign(x) (0 at 0)."""
        v = self._plain()
        out = Node(np.abs(v), (self,))

        def back():
            self._acc("bar", out.bar * np.sign(v))
        out._backward = back
        return out

    def square(self):
        v = self._plain()
        out = Node(v * v, (self,))

        def back():
            self._acc("bar", out.bar * (2.0 * v))
        out._backward = back
        return out

    def mean(self):
        v = self._plain()
        out = Node(np.asarray(v.mean()), (self,))

        def back():
            self._acc("bar", np.full_like(v, out.bar / v.size))
        out._backward = back
        return out

    # -- jet component extraction -----------------------------------------
    def value(self) -> "Node":
        out = Node(self.jet.value, (self,))

        def back():
            self._acc("bar_v", out.bar)
        out._backward = back
        return out

    def spatial_grad(self) -> "Node":
        out = Node(self.jet.grad, (self,))

        def back():
            self._acc("bar_g", out.bar)
        out._backward = back
        return out

    def laplacian(self) -> "Node":
        out = Node(self.jet.lap, (self,))

        def back():
            self._acc("bar_l", out.bar)
        out._backward = back
        return out


def param(array: np.ndarray) -> Node:
    return Node(array, needs_grad=True)


def const(array) -> Node:
    return Node(array, needs_grad=False)


def const_jet(jet: Jet) -> Node:
    return Node(jet, needs_grad=False)


def dot_spatial(a: Node, b: Node) -> Node:
    """Sum over the spatial axis of an elementwise product, e.g. grad . grad."""
    av, bv = a._plain(), b._plain()
    out = Node(np.sum(av * bv, axis=1), (a, b))

    def back():
        if a.needs_grad:
            a._acc("bar", _exp1(out.bar) * bv)
        if b.needs_grad:
            b._acc("bar", _exp1(out.bar) * av)
    out._backward = back
    return out


def affine(x: Node, w: Node, b: Node) -> Node:
    """x @ W + b on a jet or plain node; W, b are plain (parameter) nodes."""
    wv, bv = w._plain(), b._plain()
    if x.jet is not None:
        xj = x.jet
        out = Node(xj.affine(wv, bv), (x, w, b))

        def back():
            bsz, n = xj.value.shape
            if out.bar_v is not None:
                if x.needs_grad:
                    x._acc("bar_v", out.bar_v @ wv.T)
                w._acc("bar", xj.value.T @ out.bar_v)
                b._acc("bar", out.bar_v.sum(axis=0))
            if out.bar_g is not None:
                bg2 = out.bar_g.reshape(bsz * 3, -1)
                if x.needs_grad:
                    x._acc("bar_g", (bg2 @ wv.T).reshape(bsz, 3, n))
                w._acc("bar", xj.grad.reshape(bsz * 3, n).T @ bg2)
            if out.bar_l is not None:
                if x.needs_grad:
                    x._acc("bar_l", out.bar_l @ wv.T)
                w._acc("bar", xj.lap.T @ out.bar_l)
    else:
        xv = x._plain()
        out = Node(xv @ wv + bv, (x, w, b))

        def back():
            if x.needs_grad:
                x._acc("bar", out.bar @ wv.T)
            w._acc("bar", xv.T @ out.bar)
            b._acc("bar", out.bar.sum(axis=0))
    out._backward = back
    return out


def tanh(x: Node) -> Node:
    """tanh on a jet or plain node.

    Jet forward (s = tanh(v), d1 = 1 - s^2, d2 = -2 s d1):
        value = s,  grad = d1 * g,  lap = d2 * |g|^2 + d1 * l
    The backward additionally needs d3 = d(d2)/dv = -2 d1^2 + 4 s^2 d1.
    """
    if x.jet is not None:
        xj = x.jet
        s = np.tanh(xj.value)
        d1 = 1.0 - s * s
        d2 = -2.0 * s * d1
        gsq = xj.grad_sq()
        out = Node(Jet(s, _exp1(d1) * xj.grad, d2 * gsq + d1 * xj.lap), (x,))

        def back():
            bv = None
            if out.bar_v is not None:
                bv = out.bar_v * d1
            if out.bar_g is not None:
                t = np.sum(out.bar_g * xj.grad, axis=1) * d2
                bv = t if bv is None else bv + t
                x._acc("bar_g", _exp1(d1) * out.bar_g)
            if out.bar_l is not None:
                d3 = (4.0 * s * s - 2.0 * d1) * d1
                t = out.bar_l * (d3 * gsq + d2 * xj.lap)
                bv = t if bv is None else bv + t
                x._acc("bar_g", _exp1(2.0 * d2 * out.bar_l) * xj.grad)
                x._acc("bar_l", out.bar_l * d1)
            if bv is not None:
                x._acc("bar_v", bv)
    else:
        s = np.tanh(x._plain())
        out = Node(s, (x,))

        def back():
            x._acc("bar", out.bar * (1.0 - s * s))
    out._backward = back
    return out


def squeeze_last(x: Node) -> Node:
    """Drop a trailing feature axis of size 1 from a jet or plain node."""
    if x.jet is not None:
        xj = x.jet
        out = Node(Jet(xj.value[:, 0], xj.grad[:, :, 0], xj.lap[:, 0]), (x,))

        def back():
            if out.bar_v is not None:
                x._acc("bar_v", out.bar_v[:, None])
            if out.bar_g is not None:
                x._acc("bar_g", out.bar_g[:, :, None])
            if out.bar_l is not None:
                x._acc("bar_l", out.bar_l[:, None])
    else:
        out = Node(x._plain()[:, 0], (x,))

        def back():
            x._acc("bar", out.bar[:, None])
    out._backward = back
    return out


def _topo(root: Node) -> list[Node]:
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Node) -> None:
    """Accumulate adjoints of every node reachable from a scalar loss."""
    lv = loss._plain()
    if lv.ndim != 0:
        raise ValueError(f"loss must be scalar, got shape {lv.shape}")
    if not np.isfinite(lv):
        raise NumericsError(f"non-finite loss value: {lv}")
    loss.bar = np.asarray(1.0)
    for node in reversed(_topo(loss)):
        if node._backward is not None and node.needs_grad:
            node._backward()


def value_and_grad(loss: Node, params: list[Node]) -> tuple[float, list[np.ndarray]]:
    """Loss value plus d(loss)/d(p) for each parameter node.

    A parameter whose adjoint was never touched has exactly zero gradient
    (e.g. a bias the loss is structurally invariant to) and gets a zero
    array.
    """
    backward(loss)
    return float(loss._plain()), [
        p.bar if p.bar is not None else np.zeros_like(p.val) for p in params
    ]
