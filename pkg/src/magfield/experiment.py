"""Experiment configuration and sweep orchestration.

One JSON document drives everything: dataset synthesis, per-method training,
evaluation, and the (frequency x measurement-count x seed x method) sweep
with an optional physics-weight sweep on top.  Cells live under

    out/<freq>Hz/M<count>/seed<k>/<method>/

and a cell is complete when its ``metrics.csv`` exists, so reruns only
regenerate deleted cells.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import NnInterpolator, nf_baseline_config, nn_predict
from .dataset import (load_dataset, make_dataset, room_from_meta,
                      save_dataset, sources_from_meta)
from .evaluate import Metrics, residual_stats, test_lsd, write_metrics_csv
from .model import PrbModel, load_model, save_model
from .room import RoomSpec, random_source, synthesize_field
from .training import TrainConfig, train

METHODS = ("prb_pinn", "nf", "nearest")


@dataclass
class NetworkConfig:
    rff_rows: int = 128
    rff_scale: float = 1.0
    hidden_width: int = 256
    hidden_layers: int = 4
    shared_rff: bool = True


@dataclass
class ExperimentConfig:
    room: RoomSpec = field(default_factory=lambda: RoomSpec(dims=(3.0, 4.0, 6.0), t60=0.2))
    frequencies_hz: list[float] = field(default_factory=lambda: [200.0, 400.0, 600.0])
    num_measurements: list[int] = field(default_factory=lambda: [5, 10, 20, 50])
    methods: list[str] = field(default_factory=lambda: list(METHODS))
    seeds: list[int] = field(default_factory=lambda: list(range(64)))
    lattice_n: int = 33
    max_order: int = 30
    lambda_pde_sweep: list[float] = field(default_factory=list)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: str = "out"
    residual_probes: int = 512

    def __post_init__(self):
        if not self.methods:
            raise ValueError("method list must not be empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if any(f <= 0 for f in self.frequencies_hz):
            raise ValueError("frequencies must be positive")
        if not self.seeds:
            raise ValueError("seed list must not be empty")


def desk_scale_preset(cfg: ExperimentConfig) -> ExperimentConfig:
    """Reduced lattice/iteration/network preset for desktop-CPU runs."""
    return replace(
        cfg,
        lattice_n=17,
        max_order=16,
        network=NetworkConfig(rff_rows=48, rff_scale=1.75, hidden_width=64,
                              hidden_layers=3, shared_rff=cfg.network.shared_rff),
        train=replace(cfg.train, iterations=20_000, collocation_count=128,
                      log_every=1000),
    )


# ---------------------------------------------------------------------------
# JSON round trip (unknown keys rejected)
# ---------------------------------------------------------------------------

def _from_keys(cls, data: dict, what: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    top = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - top
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "room" in data:
        room = dict(data["room"])
        if "dims" in room:
            room["dims"] = tuple(room["dims"])
        if room.get("target_center") is not None:
            room["target_center"] = tuple(room["target_center"])
        data["room"] = _from_keys(RoomSpec, room, "room")
    if "network" in data:
        data["network"] = _from_keys(NetworkConfig, dict(data["network"]), "network")
    if "train" in data:
        data["train"] = _from_keys(TrainConfig, dict(data["train"]), "train")
    return ExperimentConfig(**data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = dataclasses.asdict(cfg)
    out["room"] = {
        "dims": list(cfg.room.dims),
        "t60": cfg.room.t60,
        "speed_of_sound": cfg.room.speed_of_sound,
        "target_center": None if cfg.room.target_center is None
        else list(cfg.room.target_center),
    }
    return out


def load_config(path: str | Path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n",
                          encoding="utf-8")


# ---------------------------------------------------------------------------
# Cell layout
# ---------------------------------------------------------------------------

def cell_dir(cfg: ExperimentConfig, freq: float, m: int, seed: int) -> Path:
    return Path(cfg.out_dir) / f"{freq:g}Hz" / f"M{m}" / f"seed{seed}"


def dataset_path(cfg: ExperimentConfig, freq: float, m: int, seed: int) -> Path:
    return cell_dir(cfg, freq, m, seed) / "dataset.csv"


def method_label(method: str, lambda_pde: float | None) -> str:
    if lambda_pde is None:
        return method
    return f"{method}(lambda_pde={lambda_pde:g})"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def simulate_cell(cfg: ExperimentConfig, freq: float, m: int, seed: int,
                  force: bool = False) -> Path:
    """Write one cell's dataset (skipped when it already exists)."""
    path = dataset_path(cfg, freq, m, seed)
    if path.exists() and not force:
        return path
    path.parent.mkdir(parents=True, exist_ok=True)
    src = random_source(cfg.room, np.random.default_rng(seed))
    ds = make_dataset(cfg.room, [src], freq, cfg.lattice_n, m, cfg.max_order, seed)
    save_dataset(ds, path, cfg.room, [src], cfg.max_order)
    return path


def build_model(cfg: ExperimentConfig, seed: int) -> PrbModel:
    net = cfg.network
    return PrbModel.create(seed=seed, rff_rows=net.rff_rows,
                           hidden_width=net.hidden_width,
                           hidden_layers=net.hidden_layers,
                           shared_rff=net.shared_rff, rff_scale=net.rff_scale)


def train_config_for(cfg: ExperimentConfig, method: str, seed: int,
                     lambda_pde: float | None = None) -> TrainConfig:
    tc = replace(cfg.train, seed=seed)
    if method == "nf":
        return nf_baseline_config(tc)
    if lambda_pde is not None:
        tc = replace(tc, lambda_pde=lambda_pde)
    return tc


def train_cell(cfg: ExperimentConfig, freq: float, m: int, seed: int, method: str,
               lambda_pde: float | None = None, force: bool = False) -> Path:
    """Train one method in one cell; returns the method directory.

    Skipped when the final artifact already exists (unless forced), so a
    partially completed sweep resumes where it stopped.  ``nearest`` needs
    no training and only records a descriptor.
    """
    ds_path = simulate_cell(cfg, freq, m, seed)
    out = ds_path.parent / method_label(method, lambda_pde)
    out.mkdir(parents=True, exist_ok=True)
    if method == "nearest":
        if not (out / "interpolator.json").exists() or force:
            ds, _ = load_dataset(ds_path)
            desc = {"method": "nearest", "dataset": ds_path.name,
                    "num_measurements": int(ds.meas_points.shape[0])}
            (out / "interpolator.json").write_text(
                json.dumps(desc, indent=2) + "\n", encoding="utf-8")
        return out
    if (out / "ckpt_final.json").exists() and not force:
        return out
    ds, _ = load_dataset(ds_path)
    model = build_model(cfg, seed)
    tc = train_config_for(cfg, method, seed, lambda_pde)
    model, log = train(model, ds, tc, out_dir=out)
    log.to_csv(out / "trainlog.csv")
    save_model(model, out / "ckpt_final.json")
    return out


def evaluate_cell(cfg: ExperimentConfig, freq: float, m: int, seed: int, method: str,
                  lambda_pde: float | None = None) -> Metrics:
    """Compute (and persist) one cell's metrics row."""
    ds_path = dataset_path(cfg, freq, m, seed)
    ds, _ = load_dataset(ds_path)
    label = method_label(method, lambda_pde)
    out = ds_path.parent / label
    if method == "nearest":
        interp = NnInterpolator.from_dataset(ds)
        metrics = test_lsd(lambda x: nn_predict(interp, x), ds, label)
    else:
        model = load_model(out / "ckpt_final.json")
        rms = residual_stats(model, ds.wavenumber, cfg.residual_probes,
                             seed, ds.region_bounds())
        metrics = test_lsd(model.magnitude, ds, label, pde_residual_rms=rms)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out / "metrics.csv", [metrics])
    return metrics


def sweep_tasks(cfg: ExperimentConfig) -> list[tuple[float, int, int, str, float | None]]:
    """Cartesian grid of sweep cells, physics-weight variants included."""
    tasks = []
    for freq in cfg.frequencies_hz:
        for m in cfg.num_measurements:
            for seed in cfg.seeds:
                for method in cfg.methods:
                    tasks.append((freq, m, seed, method, None))
                    if method == "prb_pinn":
                        for lam in cfg.lambda_pde_sweep:
                            tasks.append((freq, m, seed, method, lam))
    return tasks


def run_sweep(cfg: ExperimentConfig, progress=None) -> tuple[list[Metrics], list[str]]:
    """Run every incomplete cell; returns (metric rows, failure messages).

    Individual cell failures are recorded and the sweep continues.  The
    aggregate table is rewritten at ``out_dir/metrics.csv``.
    """
    rows: list[Metrics] = []
    failures: list[str] = []
    for freq, m, seed, method, lam in sweep_tasks(cfg):
        label = method_label(method, lam)
        try:
            train_cell(cfg, freq, m, seed, method, lam)
            metrics = evaluate_cell(cfg, freq, m, seed, method, lam)
            rows.append(metrics)
            if progress is not None:
                progress(f"{freq:g}Hz M{m} seed{seed} {label}: "
                         f"median {metrics.median_lsd_db:.3f} dB")
        except Exception as err:  # cell isolation: record and continue
            failures.append(f"{freq:g}Hz M{m} seed{seed} {label}: {err}")
            if progress is not None:
                progress(f"{freq:g}Hz M{m} seed{seed} {label}: FAILED ({err})")
    write_metrics_csv(Path(cfg.out_dir) / "metrics.csv", rows)
    return rows, failures


def ground_truth_predictor(meta: dict):
    """Magnitude of the re-synthesized field from a dataset sidecar."""
    room = room_from_meta(meta)
    sources = sources_from_meta(meta)

    def predict(points: np.ndarray) -> np.ndarray:
        u = synthesize_field(room, sources, np.atleast_2d(points),
                             meta["frequency_hz"], meta["max_order"])
        return np.abs(u)

    return predict
