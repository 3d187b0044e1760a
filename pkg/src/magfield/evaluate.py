"""Test-set metrics, residual statistics, and magnitude-slice rendering.

The headline metric is the log-spectral distance |20 log10(a / a_hat)| in
dB between ground-truth and predicted magnitudes over the held-out test
points, reported as both mean and median.  Slices are written as ASCII
portable graymaps (P2) with the raw grid in a CSV beside them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import FieldDataset
from .model import PrbModel, helmholtz_residual
from .training import sample_collocation

Predictor = Callable[[np.ndarray], np.ndarray]

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass
class Metrics:
    method: str
    frequency_hz: float
    num_measurements: int
    seed: int
    lsd_db: np.ndarray = field(repr=False)
    mean_lsd_db: float = 0.0
    median_lsd_db: float = 0.0
    pde_residual_rms: float = float("nan")

    def __post_init__(self):
        self.lsd_db = np.asarray(self.lsd_db, dtype=float)
        self.mean_lsd_db = float(np.mean(self.lsd_db))
        self.median_lsd_db = float(np.median(self.lsd_db))


def test_lsd(predict: Predictor, ds: FieldDataset, method: str = "",
             pde_residual_rms: float = float("nan")) -> Metrics:
    """Per-test-point log-spectral distance of a magnitude predictor."""
    if ds.test_points.shape[0] == 0:
        raise ValueError("dataset has no test points")
    pred = np.asarray(predict(ds.test_points), dtype=float)
    if np.any(pred <= 0):
        raise ValueError("predicted magnitude must be positive")
    truth = np.abs(ds.test_pressure)
    lsd = np.abs(20.0 * np.log10(truth / pred))
    return Metrics(method, ds.frequency_hz, ds.meas_points.shape[0], ds.seed,
                   lsd, pde_residual_rms=pde_residual_rms)


METRICS_HEADER = "method,frequency_hz,num_measurements,seed,mean_lsd_db,median_lsd_db,pde_rms"


def write_metrics_csv(path: str | Path, rows: list[Metrics]) -> None:
    lines = [METRICS_HEADER]
    for m in rows:
        lines.append(f"{m.method},{m.frequency_hz:.17g},{m.num_measurements},"
                     f"{m.seed},{m.mean_lsd_db:.17g},{m.median_lsd_db:.17g},"
                     f"{m.pde_residual_rms:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_metrics_csv(path: str | Path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if lines[0] != METRICS_HEADER:
        raise ValueError(f"unrecognized metrics header: {lines[0]!r}")
    keys = METRICS_HEADER.split(",")
    rows = []
    for line in lines[1:]:
        vals = line.split(",")
        row = dict(zip(keys, vals))
        for key in ("frequency_hz", "mean_lsd_db", "median_lsd_db", "pde_rms"):
            row[key] = float(row[key])
        for key in ("num_measurements", "seed"):
            row[key] = int(row[key])
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Residual statistics
# ---------------------------------------------------------------------------

def residual_stats(model: PrbModel, k: float, probe_count: int, seed: int,
                   bounds: tuple[np.ndarray, np.ndarray]) -> float:
    """RMS Helmholtz residual magnitude over seeded uniform probes."""
    if probe_count < 1:
        raise ValueError("probe_count must be >= 1")
    probes = sample_collocation(np.random.default_rng(seed), bounds, probe_count)
    res = helmholtz_residual(model, probes, k)
    return float(np.sqrt(np.mean(res.real**2 + res.imag**2)))


# ---------------------------------------------------------------------------
# Slice rendering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlaneSpec:
    """Axis-aligned plane: the named axis is held at ``value``."""

    axis: str
    value: float

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"axis must be one of x/y/z, got {self.axis!r}")


@dataclass
class SliceGrid:
    plane: PlaneSpec
    resolution: tuple[int, int]
    u_axis: str
    v_axis: str
    u_coords: np.ndarray
    v_coords: np.ndarray
    values: np.ndarray       # linear magnitudes, shape (nu, nv)
    db_range: tuple[float, float]


def slice_points(plane: PlaneSpec, resolution: tuple[int, int],
                 bounds: tuple[np.ndarray, np.ndarray]):
    """Grid coordinates covering the region's cross-section of the plane."""
    lo, hi = bounds
    fixed = _AXES[plane.axis]
    if not lo[fixed] <= plane.value <= hi[fixed]:
        raise ValueError(
            f"plane {plane.axis}={plane.value} does not intersect the region")
    free = [a for a in range(3) if a != fixed]
    nu, nv = resolution
    u = np.linspace(lo[free[0]], hi[free[0]], nu)
    v = np.linspace(lo[free[1]], hi[free[1]], nv)
    pts = np.empty((nu * nv, 3))
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts[:, free[0]] = uu.ravel()
    pts[:, free[1]] = vv.ravel()
    pts[:, fixed] = plane.value
    axis_names = "xyz"
    return u, v, pts, axis_names[free[0]], axis_names[free[1]]


def render_slice(predict: Predictor, plane: PlaneSpec, resolution: tuple[int, int],
                 out_dir: str | Path, bounds: tuple[np.ndarray, np.ndarray],
                 name: str = "slice") -> SliceGrid:
    """Evaluate a magnitude predictor on a plane and write image + data files.

    Writes ``<name>.pgm`` (P2, normalized over the per-image dB range),
    ``<name>.csv`` (raw linear magnitudes), and ``<name>.meta.json``.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        u, v, pts, u_axis, v_axis = slice_points(plane, resolution, bounds)
        nu, nv = resolution
        mags = np.asarray(predict(pts), dtype=float).reshape(nu, nv)
        if np.any(mags <= 0) or not np.all(np.isfinite(mags)):
            raise ValueError("slice rendering needs positive finite magnitudes")
        db = 20.0 * np.log10(mags)
        lo_db, hi_db = float(db.min()), float(db.max())
        if hi_db > lo_db:
            pix = np.rint((db - lo_db) / (hi_db - lo_db) * 255.0).astype(int)
        else:
            pix = np.zeros_like(db, dtype=int)

        pgm_lines = ["P2", f"{nu} {nv}", "255"]
        # image rows scan v from top (largest) down, columns scan u ascending
        for iv in range(nv - 1, -1, -1):
            pgm_lines.append(" ".join(str(int(pix[iu, iv])) for iu in range(nu)))
        (out_dir / f"{name}.pgm").write_text("\n".join(pgm_lines) + "\n",
                                             encoding="utf-8")

        csv_lines = [",".join(f"{mags[iu, iv]:.17g}" for iv in range(nv))
                     for iu in range(nu)]
        (out_dir / f"{name}.csv").write_text("\n".join(csv_lines) + "\n",
                                             encoding="utf-8")

        meta = {
            "plane_axis": plane.axis,
            "plane_value": plane.value,
            "u_axis": u_axis,
            "v_axis": v_axis,
            "resolution": [nu, nv],
            "u_range": [float(u[0]), float(u[-1])],
            "v_range": [float(v[0]), float(v[-1])],
            "db_range": [lo_db, hi_db],
            "csv_units": "linear magnitude, rows scan u, columns scan v",
        }
        (out_dir / f"{name}.meta.json").write_text(
            json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    except OSError as err:
        raise OSError(f"failed writing slice files under {out_dir}: {err}") from err
    return SliceGrid(plane, (nu, nv), u_axis, v_axis, u, v, mags, (lo_db, hi_db))
