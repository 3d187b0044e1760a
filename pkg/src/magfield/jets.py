"""Exact propagation of (value, spatial gradient, Laplacian) triples.

A ``Jet`` bundles a scalar field's value, its gradient with respect to the
three spatial coordinates, and its Laplacian, evaluated at a batch of points.
All arithmetic propagates the triple exactly (product and chain rules), so a
network evaluated on jets yields its exact spatial derivatives in a single
forward pass, with no finite differencing and no nested tapes.

Layout convention: ``value`` has shape ``(B,)`` or ``(B, n)`` for a batch of
B points (n features); ``grad`` inserts the 3-axis at position 1, giving
``(B, 3)`` or ``(B, 3, n)``; ``lap`` matches ``value``.

Chain rule for an elementwise map f applied to jet x:

    value = f(x.value)
    grad  = f'(x.value) * x.grad
    lap   = f''(x.value) * |x.grad|^2 + f'(x.value) * x.lap

Product rule for jets f, g:

    grad(f g) = f grad(g) + g grad(f)
    lap(f g)  = f lap(g) + 2 grad(f).grad(g) + g lap(f)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _exp1(a: np.ndarray) -> np.ndarray:
    """Insert the spatial axis so `a` broadcasts against a grad array."""
    return a[:, None] if a.ndim == 1 else a[:, None, :]


@dataclass
class Jet:
    value: np.ndarray
    grad: np.ndarray
    lap: np.ndarray

    @staticmethod
    def coords(x: np.ndarray) -> "Jet":
        """Jet of the identity field at points ``x`` of shape (B, 3)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != 3:
            raise ValueError(f"expected points of shape (B, 3), got {x.shape}")
        b = x.shape[0]
        grad = np.broadcast_to(np.eye(3), (b, 3, 3)).copy()
        return Jet(x.copy(), grad, np.zeros((b, 3)))

    @staticmethod
    def constant(value, batch: int) -> "Jet":
        """Spatially constant field: zero gradient and Laplacian."""
        value = np.asarray(value, dtype=float)
        v = np.broadcast_to(value, (batch,) + value.shape).copy()
        return Jet(v, np.zeros(v.shape[:1] + (3,) + v.shape[1:]), np.zeros_like(v))

    def grad_sq(self) -> np.ndarray:
        """|grad|^2 summed over the spatial axis; shaped like ``value``."""
        return np.sum(self.grad**2, axis=1)

    def grad_dot(self, other: "Jet") -> np.ndarray:
        """grad . grad(other) summed over the spatial axis."""
        return np.sum(self.grad * other.grad, axis=1)

    def _chain(self, f, fp, fpp) -> "Jet":
        v = self.value
        d1 = fp(v)
        return Jet(f(v), _exp1(d1) * self.grad, fpp(v) * self.grad_sq() + d1 * self.lap)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value + other.value, self.grad + other.grad,
                       self.lap + other.lap)
        return Jet(self.value + other, self.grad.copy(), self.lap.copy())

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.value, -self.grad, -self.lap)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            f, g = self, other
            return Jet(
                f.value * g.value,
                _exp1(f.value) * g.grad + _exp1(g.value) * f.grad,
                f.value * g.lap + 2.0 * f.grad_dot(g) + g.value * f.lap,
            )
        c = np.asarray(other, dtype=float)
        return Jet(self.value * c, _exp1(c) * self.grad if c.ndim else c * self.grad,
                   self.lap * c)

    __rmul__ = __mul__

    def exp(self):
        e = np.exp(self.value)
        return Jet(e, _exp1(e) * self.grad, e * (self.grad_sq() + self.lap))

    def log(self):
        return self._chain(np.log, lambda v: 1.0 / v, lambda v: -1.0 / v**2)

    def sin(self):
        return self._chain(np.sin, np.cos, lambda v: -np.sin(v))

    def cos(self):
        return self._chain(np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))

    def tanh(self):
        t = np.tanh(self.value)
        d1 = 1.0 - t**2
        return Jet(t, _exp1(d1) * self.grad, -2.0 * t * d1 * self.grad_sq() + d1 * self.lap)

    def square(self):
        return self._chain(np.square, lambda v: 2.0 * v, lambda v: np.full_like(v, 2.0))

    def sqrt(self):
        return self._chain(np.sqrt, lambda v: 0.5 / np.sqrt(v),
                           lambda v: -0.25 * v**-1.5)

    def affine(self, weight: np.ndarray, bias: np.ndarray) -> "Jet":
        """Linear layer over the feature axis: value (B, n) -> (B, m)."""
        b, n = self.value.shape
        gv = self.grad.reshape(b * 3, n) @ weight
        return Jet(self.value @ weight + bias, gv.reshape(b, 3, -1), self.lap @ weight)

    def sum_features(self) -> "Jet":
        """Sum over the trailing feature axis: (B, n) -> (B,)."""
        return Jet(self.value.sum(axis=-1), self.grad.sum(axis=-1), self.lap.sum(axis=-1))

    def features(self, sl) -> "Jet":
        """Select feature columns: value (B, n) -> (B, k)."""
        return Jet(self.value[:, sl], self.grad[:, :, sl], self.lap[:, sl])

    def __getitem__(self, idx) -> "Jet":
        """Select along the batch axis."""
        return Jet(self.value[idx], self.grad[idx], self.lap[idx])
