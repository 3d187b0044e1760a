"""Training loop: AdamW over the weighted data + physics objective.

Each iteration draws a fresh batch of collocation points (child-seeded per
iteration, so any iteration's batch is reproducible in isolation), evaluates
the data loss on the full measurement set plus the physics loss on the
batch, reverse-accumulates parameter gradients, and applies one AdamW step
with a stepwise-decaying learning rate.

With ``lambda_pde = 0`` the physics branch is never built: the phase net has
no gradient path and stays exactly at its initialization, which is the
data-only baseline configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .dataset import FieldDataset
from .errors import NumericsError, TrainingAborted
from .model import PrbModel, build_loss_graph, save_model
from .network import flatten_params


@dataclass
class TrainConfig:
    iterations: int = 500_000
    lr0: float = 1e-3
    lr_decay_factor: float = 0.9
    lr_decay_every: int = 10_000
    lambda_data: float = 0.1
    lambda_pde: float = 1e-3
    collocation_count: int = 256
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    seed: int = 0
    checkpoint_every: int = 0   # 0 disables periodic checkpoints
    log_every: int = 100

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError("lr_decay_factor must be in (0, 1]")
        if self.lr_decay_every < 1:
            raise ValueError("lr_decay_every must be >= 1")
        if self.collocation_count < 1:
            raise ValueError("collocation_count must be >= 1")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass
class TrainLog:
    """Per-logged-iteration loss trajectory."""

    entries: list[tuple[int, float, float, float, float]] = field(default_factory=list)

    def append(self, iteration: int, data_db: float, pde: float, total: float,
               lr: float) -> None:
        self.entries.append((iteration, data_db, pde, total, lr))

    def to_csv(self, path: str | Path) -> None:
        lines = ["iteration,data_db,pde,total,lr"]
        for it, d, p, t, lr in self.entries:
            lines.append(f"{it},{d:.17g},{p:.17g},{t:.17g},{lr:.17g}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def lr_at(config: TrainConfig, iteration: int) -> float:
    """Learning rate after the stepwise decays: lr0 * factor**(it // every)."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return config.lr0 * config.lr_decay_factor ** (iteration // config.lr_decay_every)


@dataclass
class OptimizerState:
    """AdamW moment vectors aligned with the flat parameter layout."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @staticmethod
    def zeros(n: int) -> "OptimizerState":
        return OptimizerState(np.zeros(n), np.zeros(n))


def adamw_step(params: np.ndarray, grads: np.ndarray, state: OptimizerState,
               lr: float, config: TrainConfig) -> None:
    """One decoupled-weight-decay Adam update, in place.

    theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
    """
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter/gradient/state length mismatch")
    if not np.all(np.isfinite(grads)):
        bad = int(np.flatnonzero(~np.isfinite(grads))[0])
        raise NumericsError(f"non-finite gradient at flat index {bad}")
    state.step += 1
    t = state.step
    state.m *= config.beta1
    state.m += (1.0 - config.beta1) * grads
    state.v *= config.beta2
    state.v += (1.0 - config.beta2) * grads**2
    m_hat = state.m / (1.0 - config.beta1**t)
    v_hat = state.v / (1.0 - config.beta2**t)
    params -= lr * (m_hat / (np.sqrt(v_hat) + config.eps)
                    + config.weight_decay * params)


def sample_collocation(rng: np.random.Generator, bounds: tuple[np.ndarray, np.ndarray],
                       count: int) -> np.ndarray:
    """``count`` points i.i.d. uniform over the axis-aligned box ``bounds``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    lo, hi = bounds
    return rng.uniform(lo, hi, size=(count, 3))


def collocation_batch(seed: int, iteration: int,
                      bounds: tuple[np.ndarray, np.ndarray], count: int) -> np.ndarray:
    """The collocation batch of one iteration, reproducible in isolation."""
    return sample_collocation(np.random.default_rng((seed, iteration)), bounds, count)


def _active_nets(model: PrbModel, config: TrainConfig) -> list:
    nets = [model.mag_net]
    if config.lambda_pde > 0:
        nets.append(model.phase_net)
    return nets


def _write_back(vec: np.ndarray, nets) -> None:
    off = 0
    for net in nets:
        for w, b in net.layers:
            np.copyto(w, vec[off:off + w.size].reshape(w.shape))
            off += w.size
            np.copyto(b, vec[off:off + b.size])
            off += b.size


def train(model: PrbModel, dataset: FieldDataset, config: TrainConfig,
          out_dir: str | Path | None = None) -> tuple[PrbModel, TrainLog]:
    """Optimize the model in place; returns it with the loss trajectory.

    On a non-finite loss or gradient the run aborts: parameters of the last
    finite iteration are restored, persisted to ``ckpt_abort.json`` when an
    output directory is given, and :class:`TrainingAborted` is raised.
    """
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    bounds = dataset.region_bounds()
    k = dataset.wavenumber
    log = TrainLog()
    nets = _active_nets(model, config)
    theta = flatten_params(nets)
    state = OptimizerState.zeros(theta.size)
    prev = theta.copy()

    for it in range(config.iterations):
        colloc = collocation_batch(config.seed, it, bounds, config.collocation_count)
        lr = lr_at(config, it)
        try:
            total, data, pde, params = build_loss_graph(
                model, dataset.meas_points, dataset.meas_magnitudes, colloc,
                k, config.lambda_data, config.lambda_pde)
            total_value, grads = ad.value_and_grad(total, params)
            flat_grad = np.concatenate([g.ravel() for g in grads])
            prev = theta.copy()
            adamw_step(theta, flat_grad, state, lr, config)
        except NumericsError as err:
            _write_back(prev, nets)
            ckpt = None
            if out_dir is not None:
                ckpt = out_dir / "ckpt_abort.json"
                save_model(model, ckpt)
            raise TrainingAborted(
                f"training aborted at iteration {it}: {err}", it, ckpt) from err
        _write_back(theta, nets)

        if it % config.log_every == 0 or it == config.iterations - 1:
            pde_value = float(pde._plain()) if pde is not None else 0.0
            log.append(it, float(data._plain()), pde_value, total_value, lr)
        if (out_dir is not None and config.checkpoint_every > 0
                and (it + 1) % config.checkpoint_every == 0):
            save_model(model, out_dir / f"ckpt_{it + 1}.json")
    return model, log
