"""Random-Fourier-feature MLPs with exact spatial derivatives.

The coordinate embedding is gamma(x) = [sin(2 pi B x), cos(2 pi B x)] with
a fixed Gaussian matrix B; each feature is an explicit sinusoid, so its jet
(value, gradient, Laplacian) is written down in closed form and the MLP
layers propagate it exactly.  All parameters are float64.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .jets import Jet


@dataclass(frozen=True)
class RffMatrix:
    """Fixed embedding frequencies: rows i.i.d. standard normal under seed.

    Features are sin/cos of ``scale * b_i . x``, so ``scale`` converts the
    unit-variance rows into angular frequencies (rad/m).  ``scale = 1``
    reads the rows as angular frequencies directly; ``scale = 2 pi`` reads
    them as cycles/m.
    """

    b: np.ndarray
    seed: int
    scale: float = 1.0

    @staticmethod
    def create(rows: int, seed: int, scale: float = 1.0) -> "RffMatrix":
        rng = np.random.default_rng(seed)
        return RffMatrix(rng.standard_normal((rows, 3)), seed, scale)

    @property
    def feature_dim(self) -> int:
        return 2 * self.b.shape[0]

    @property
    def omega(self) -> np.ndarray:
        """Angular frequency rows (rad/m): scale * b."""
        return self.scale * self.b


@dataclass
class MlpParams:
    """Dense layers (weight, bias); tanh on hidden layers, identity output."""

    layers: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w, _ in self.layers]

    def copy(self) -> "MlpParams":
        return MlpParams([(w.copy(), b.copy()) for w, b in self.layers])


def init_mlp(in_dim: int, hidden_width: int, hidden_layers: int,
             rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases, scalar output."""
    dims = [in_dim] + [hidden_width] * hidden_layers + [1]
    layers = []
    for n, m in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / (n + m))
        layers.append((rng.uniform(-limit, limit, size=(n, m)), np.zeros(m)))
    return MlpParams(layers)


# ---------------------------------------------------------------------------
# Coordinate embeddings
# ---------------------------------------------------------------------------

def rff_embed(x: np.ndarray, rff: RffMatrix) -> Jet:
    """Jets of the sinusoidal features at points ``x`` of shape (B, 3).

    With w_i the angular frequency row:  the sin feature has gradient
    cos(t) w_i and Laplacian -|w_i|^2 sin(t); the cos feature mirrors it.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = rff.omega                                  # (R, 3)
    t = x @ w.T                                    # (B, R)
    sin_t, cos_t = np.sin(t), np.cos(t)
    wsq = np.sum(w**2, axis=1)                     # (R,)
    value = np.concatenate([sin_t, cos_t], axis=1)
    grad = np.concatenate([cos_t[:, None, :] * w.T[None, :, :],
                           -sin_t[:, None, :] * w.T[None, :, :]], axis=2)
    lap = np.concatenate([-wsq * sin_t, -wsq * cos_t], axis=1)
    return Jet(value, grad, lap)


def rff_values(x: np.ndarray, rff: RffMatrix) -> np.ndarray:
    """Feature values only (no derivatives), for data-fit branches."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = x @ rff.omega.T
    return np.concatenate([np.sin(t), np.cos(t)], axis=1)


def identity_embed(x: np.ndarray) -> Jet:
    """Raw coordinates as features; used by analytic test fixtures."""
    return Jet.coords(np.atleast_2d(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# Forward evaluation
# ---------------------------------------------------------------------------

def forward_jet(mlp: MlpParams, embedded: Jet) -> Jet:
    """Network output jet: exact value, spatial gradient, and Laplacian."""
    if embedded.value.shape[1] != mlp.layers[0][0].shape[0]:
        raise ValueError(
            f"embedding width {embedded.value.shape[1]} does not match first "
            f"layer input {mlp.layers[0][0].shape[0]}")
    h = embedded
    for w, b in mlp.layers[:-1]:
        h = h.affine(w, b).tanh()
    w, b = mlp.layers[-1]
    out = h.affine(w, b)
    return Jet(out.value[:, 0], out.grad[:, :, 0], out.lap[:, 0])


def forward_values(mlp: MlpParams, features: np.ndarray) -> np.ndarray:
    h = features
    for w, b in mlp.layers[:-1]:
        h = np.tanh(h @ w + b)
    w, b = mlp.layers[-1]
    return (h @ w + b)[:, 0]


# ---------------------------------------------------------------------------
# Graph construction (training path)
# ---------------------------------------------------------------------------

def param_nodes(mlp: MlpParams) -> list[tuple[ad.Node, ad.Node]]:
    return [(ad.param(w), ad.param(b)) for w, b in mlp.layers]


def graph_forward(x: ad.Node, layers: list[tuple[ad.Node, ad.Node]]) -> ad.Node:
    """Differentiable forward through the layer nodes; jet or plain input."""
    h = x
    for w, b in layers[:-1]:
        h = ad.tanh(ad.affine(h, w, b))
    w, b = layers[-1]
    return ad.squeeze_last(ad.affine(h, w, b))


# ---------------------------------------------------------------------------
# Canonical parameter flattening
# ---------------------------------------------------------------------------

def flatten_params(mlps: list[MlpParams]) -> np.ndarray:
    """Single vector in canonical order: per net, per layer, weight then bias."""
    parts = []
    for mlp in mlps:
        for w, b in mlp.layers:
            parts.append(w.ravel())
            parts.append(b.ravel())
    return np.concatenate(parts)


def unflatten_params(vec: np.ndarray, mlps: list[MlpParams]) -> list[MlpParams]:
    """Rebuild parameter sets with the same shapes from a flat vector."""
    out, off = [], 0
    for mlp in mlps:
        layers = []
        for w, b in mlp.layers:
            nw, nb = w.size, b.size
            layers.append((vec[off:off + nw].reshape(w.shape).copy(),
                           vec[off + nw:off + nw + nb].copy()))
            off += nw + nb
        out.append(MlpParams(layers))
    if off != vec.size:
        raise ValueError(f"flat vector length {vec.size} != parameter count {off}")
    return out


# ---------------------------------------------------------------------------
# Tensor serialization (little-endian float64, base64)
# ---------------------------------------------------------------------------

def encode_array(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")


def decode_array(s: str, shape: tuple[int, ...]) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(s), dtype="<f8")
    return raw.reshape(shape).astype(float, copy=True)
