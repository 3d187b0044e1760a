"""Two-network complex field model and its losses.

The field estimate is u(x) = exp(g(x) + i phi(x)): one MLP outputs the
natural-log magnitude g, the other the (unwrapped) phase phi, both reading
the same sinusoidal coordinate embedding.  The log parameterization keeps
|u| = exp(g) strictly positive and makes the dB data misfit affine in g.

Writing h = g + i phi, the Helmholtz residual collapses to

    (lap + k^2) u = u * (lap h + grad h . grad h + k^2)
                  = u * [ (lap g + |grad g|^2 - |grad phi|^2 + k^2)
                          + i (lap phi + 2 grad g . grad phi) ]

so a single jet evaluation of g and phi yields the exact residual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .errors import NumericsError
from .jets import Jet
from .network import (MlpParams, RffMatrix, decode_array, encode_array,
                      forward_jet, forward_values, graph_forward, identity_embed,
                      init_mlp, param_nodes, rff_embed, rff_values)

DB_PER_LN = 20.0 / math.log(10.0)
_MAX_LOG_MAG = 700.0  # exp overflow guard


@dataclass
class ComplexJet:
    re: Jet
    im: Jet


@dataclass
class PrbModel:
    """Log-magnitude net plus phase net over a shared coordinate embedding.

    ``rff`` may be None, in which case raw coordinates feed the networks
    directly; analytic fixtures use this to realize exact plane and
    spherical waves.  ``phase_rff`` optionally gives the phase net its own
    embedding (default: shared).
    """

    rff: RffMatrix | None
    mag_net: MlpParams
    phase_net: MlpParams
    phase_rff: RffMatrix | None = None

    @staticmethod
    def create(seed: int, rff_rows: int = 128, hidden_width: int = 256,
               hidden_layers: int = 4, shared_rff: bool = True,
               rff_scale: float = 1.0) -> "PrbModel":
        rff = RffMatrix.create(rff_rows, seed, rff_scale)
        mag = init_mlp(rff.feature_dim, hidden_width, hidden_layers,
                       np.random.default_rng((seed, 1)))
        phase = init_mlp(rff.feature_dim, hidden_width, hidden_layers,
                         np.random.default_rng((seed, 2)))
        phase_rff = None if shared_rff else RffMatrix.create(rff_rows, seed + 1, rff_scale)
        return PrbModel(rff, mag, phase, phase_rff)

    # -- embeddings -------------------------------------------------------
    def _embed_jet(self, x: np.ndarray, which: str) -> Jet:
        rff = self.rff if which == "mag" or self.phase_rff is None else self.phase_rff
        return rff_embed(x, rff) if rff is not None else identity_embed(x)

    def _embed_values(self, x: np.ndarray, which: str) -> np.ndarray:
        rff = self.rff if which == "mag" or self.phase_rff is None else self.phase_rff
        if rff is not None:
            return rff_values(x, rff)
        return np.atleast_2d(np.asarray(x, dtype=float))

    # -- evaluation -------------------------------------------------------
    def field_jets(self, x: np.ndarray) -> tuple[Jet, Jet]:
        """(g, phi) jets at points x of shape (B, 3)."""
        g = forward_jet(self.mag_net, self._embed_jet(x, "mag"))
        phi = forward_jet(self.phase_net, self._embed_jet(x, "phase"))
        return g, phi

    def log_magnitude(self, x: np.ndarray) -> np.ndarray:
        """g(x) without derivatives (value-only pass)."""
        return forward_values(self.mag_net, self._embed_values(x, "mag"))

    def phase(self, x: np.ndarray) -> np.ndarray:
        """phi(x) in radians, unwrapped (value-only pass)."""
        return forward_values(self.phase_net, self._embed_values(x, "phase"))

    def magnitude(self, x: np.ndarray) -> np.ndarray:
        g = self.log_magnitude(x)
        _check_log_mag(g)
        return np.exp(g)

    def parameter_count(self) -> int:
        return sum(w.size + b.size
                   for net in (self.mag_net, self.phase_net) for w, b in net.layers)


def _check_log_mag(g: np.ndarray) -> None:
    if np.any(g > _MAX_LOG_MAG) or not np.all(np.isfinite(g)):
        raise NumericsError("magnitude net diverged")


def reconstruct(model: PrbModel, x: np.ndarray) -> ComplexJet:
    """u(x) with exact value, spatial gradient, and Laplacian per part."""
    g, phi = model.field_jets(x)
    _check_log_mag(g.value)
    amp = g.exp()
    return ComplexJet(re=amp * phi.cos(), im=amp * phi.sin())


def residual_from_parts(g: Jet, phi: Jet, k: float) -> np.ndarray:
    """(lap + k^2) u for u = exp(g + i phi), from the (g, phi) jets."""
    a = g.lap + g.grad_sq() - phi.grad_sq() + k * k
    c = phi.lap + 2.0 * g.grad_dot(phi)
    u = np.exp(g.value) * (np.cos(phi.value) + 1j * np.sin(phi.value))
    return u * (a + 1j * c)


def helmholtz_residual(model: PrbModel, x: np.ndarray, k: float) -> np.ndarray:
    """Complex Helmholtz residual at points x of shape (B, 3)."""
    if not k > 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    g, phi = model.field_jets(x)
    _check_log_mag(g.value)
    return residual_from_parts(g, phi, k)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LossBreakdown:
    data: float
    pde: float
    total: float
    lambda_data: float
    lambda_pde: float


def data_loss(model: PrbModel, points: np.ndarray, magnitudes: np.ndarray) -> float:
    """Mean absolute log-spectral error in dB against measured magnitudes.

    Equals (20/ln 10) * mean |ln a_m - g(x_m)| under the log-magnitude
    parameterization.
    """
    mags = np.asarray(magnitudes, dtype=float)
    if mags.size == 0:
        raise ValueError("data loss needs at least one measurement")
    if np.any(mags <= 0):
        raise ValueError("nonpositive magnitude measurement")
    g = model.log_magnitude(points)
    return float(DB_PER_LN * np.mean(np.abs(np.log(mags) - g)))


def pde_loss(model: PrbModel, collocation: np.ndarray, k: float) -> float:
    """Mean squared modulus of the Helmholtz residual over the batch."""
    collocation = np.atleast_2d(collocation)
    if collocation.shape[0] < 1:
        raise ValueError("pde loss needs at least one collocation point")
    res = helmholtz_residual(model, collocation, k)
    return float(np.mean(res.real**2 + res.imag**2))


def total_loss(model: PrbModel, points: np.ndarray, magnitudes: np.ndarray,
               collocation: np.ndarray, k: float, lambda_data: float,
               lambda_pde: float) -> LossBreakdown:
    if not lambda_data > 0:
        raise ValueError("lambda_data must be positive")
    if lambda_pde < 0:
        raise ValueError("lambda_pde must be nonnegative")
    d = data_loss(model, points, magnitudes)
    p = pde_loss(model, collocation, k)
    return LossBreakdown(d, p, lambda_data * d + lambda_pde * p,
                         lambda_data, lambda_pde)


# ---------------------------------------------------------------------------
# Training graph
# ---------------------------------------------------------------------------

def build_loss_graph(model: PrbModel, meas_points: np.ndarray,
                     meas_magnitudes: np.ndarray, collocation: np.ndarray,
                     k: float, lambda_data: float, lambda_pde: float):
    """Differentiable total loss.

    Returns (total node, data node, pde node or None, parameter nodes).
    With lambda_pde = 0 the physics branch is not built, so the phase net's
    parameters are absent from the returned list and receive no updates.
    """
    if not lambda_data > 0:
        raise ValueError("lambda_data must be positive")
    mags = np.asarray(meas_magnitudes, dtype=float)
    if np.any(mags <= 0):
        raise ValueError("nonpositive magnitude measurement")

    mag_layers = param_nodes(model.mag_net)
    params = [n for pair in mag_layers for n in pair]

    feats = ad.const(model._embed_values(meas_points, "mag"))
    g_meas = graph_forward(feats, mag_layers)
    data = (ad.const(np.log(mags)) - g_meas).absval().mean() * DB_PER_LN
    if not np.isfinite(data._plain()):
        raise NumericsError(f"non-finite data loss: {float(data._plain())}")

    pde = None
    if lambda_pde > 0:
        phase_layers = param_nodes(model.phase_net)
        params += [n for pair in phase_layers for n in pair]
        emb_mag = ad.const_jet(model._embed_jet(collocation, "mag"))
        emb_phase = emb_mag if model.phase_rff is None \
            else ad.const_jet(model._embed_jet(collocation, "phase"))
        g = graph_forward(emb_mag, mag_layers)
        phi = graph_forward(emb_phase, phase_layers)
        gg, pg = g.spatial_grad(), phi.spatial_grad()
        a = g.laplacian() + ad.dot_spatial(gg, gg) - ad.dot_spatial(pg, pg) + k * k
        c = phi.laplacian() + 2.0 * ad.dot_spatial(gg, pg)
        weight = (2.0 * g.value()).exp()
        pde = (weight * (a.square() + c.square())).mean()
        if not np.isfinite(pde._plain()):
            raise NumericsError(f"non-finite pde loss: {float(pde._plain())}")
        total = lambda_data * data + lambda_pde * pde
    else:
        total = lambda_data * data
    return total, data, pde, params


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_CKPT_VERSION = 1


def save_model(model: PrbModel, path: str | Path) -> None:
    """JSON checkpoint: manifest plus base64 little-endian float64 tensors."""
    arrays: dict[str, str] = {}
    manifest = {
        "version": _CKPT_VERSION,
        "activation": "tanh",
        "embedding": "rff" if model.rff is not None else "identity",
        "rff_seed": model.rff.seed if model.rff is not None else None,
        "shared_rff": model.phase_rff is None,
        "mag_shapes": [list(w.shape) for w, _ in model.mag_net.layers],
        "phase_shapes": [list(w.shape) for w, _ in model.phase_net.layers],
    }
    if model.rff is not None:
        manifest["rff_rows"] = model.rff.b.shape[0]
        manifest["rff_scale"] = model.rff.scale
        arrays["rff_b"] = encode_array(model.rff.b)
    if model.phase_rff is not None:
        manifest["phase_rff_seed"] = model.phase_rff.seed
        arrays["phase_rff_b"] = encode_array(model.phase_rff.b)
    for name, net in (("mag", model.mag_net), ("phase", model.phase_net)):
        for i, (w, b) in enumerate(net.layers):
            arrays[f"{name}.{i}.w"] = encode_array(w)
            arrays[f"{name}.{i}.b"] = encode_array(b)
    doc = {"manifest": manifest, "arrays": arrays}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> PrbModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    man, arrays = doc["manifest"], doc["arrays"]
    if man.get("version") != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {man.get('version')}")

    def load_net(name: str, shapes) -> MlpParams:
        layers = []
        for i, (n, m) in enumerate(shapes):
            layers.append((decode_array(arrays[f"{name}.{i}.w"], (n, m)),
                           decode_array(arrays[f"{name}.{i}.b"], (m,))))
        return MlpParams(layers)

    rff = None
    if man["embedding"] == "rff":
        rff = RffMatrix(decode_array(arrays["rff_b"], (man["rff_rows"], 3)),
                        man["rff_seed"], man["rff_scale"])
    phase_rff = None
    if "phase_rff_b" in arrays:
        phase_rff = RffMatrix(decode_array(arrays["phase_rff_b"], (man["rff_rows"], 3)),
                              man["phase_rff_seed"], man["rff_scale"])
    return PrbModel(rff, load_net("mag", man["mag_shapes"]),
                    load_net("phase", man["phase_shapes"]), phase_rff)
