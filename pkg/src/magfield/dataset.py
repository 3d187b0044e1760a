"""Magnitude-only training datasets on a cubic lattice.

A dataset holds the measurement split (positions plus magnitudes only) and
the held-out test split (positions plus full complex pressure, kept for
evaluation).  Files are a UTF-8 CSV with header ``x,y,z,magnitude,re,im,split``
plus a JSON sidecar ``<name>.meta.json`` recording the generating
configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .room import RoomSpec, SourceSpec, synthesize_field


@dataclass
class FieldDataset:
    frequency_hz: float
    wavenumber: float
    meas_points: np.ndarray      # (M, 3)
    meas_magnitudes: np.ndarray  # (M,)
    test_points: np.ndarray      # (N, 3)
    test_pressure: np.ndarray    # (N,) complex
    lattice_shape: tuple[int, int, int]
    seed: int
    region_center: np.ndarray    # center of the unit-cube target region

    def region_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.region_center - 0.5, self.region_center + 0.5

    @property
    def measurements(self) -> list[tuple[np.ndarray, float]]:
        return [(p, float(m)) for p, m in zip(self.meas_points, self.meas_magnitudes)]


def lattice_points(room: RoomSpec, lattice_n: int) -> np.ndarray:
    """Cubic lattice of lattice_n**3 points filling the target region."""
    lo, hi = room.region_bounds()
    axes = [np.linspace(lo[a], hi[a], lattice_n) for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def make_dataset(room: RoomSpec, sources: list[SourceSpec], frequency_hz: float,
                 lattice_n: int, num_measurements: int, max_order: int,
                 seed: int) -> FieldDataset:
    """Synthesize the ground-truth field and split the lattice into splits.

    ``num_measurements`` lattice points are chosen uniformly at random
    (seeded) and keep only the field magnitude; every other lattice point
    goes to the test split with its complex pressure retained.
    """
    n_total = lattice_n**3
    if not 0 < num_measurements < n_total:
        raise ValueError(
            f"num_measurements must be in (0, {n_total}), got {num_measurements}")
    if not frequency_hz > 0:
        raise ValueError(f"frequency must be positive, got {frequency_hz}")

    lo, hi = room.region_bounds()
    dims = np.asarray(room.dims, dtype=float)
    if np.any(lo < 0.0) or np.any(hi > dims):
        raise ValueError("lattice extends outside room")
    for src in sources:
        p = src.pos()
        if not room.contains(p):
            raise ValueError(f"source at {p} lies outside the room")
        if np.all(p >= lo) and np.all(p <= hi):
            raise ValueError(f"source at {p} lies inside the target region")

    points = lattice_points(room, lattice_n)
    pressure = synthesize_field(room, sources, points, frequency_hz, max_order)

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_total)
    meas_idx, test_idx = perm[:num_measurements], perm[num_measurements:]
    return FieldDataset(
        frequency_hz=float(frequency_hz),
        wavenumber=room.wavenumber(frequency_hz),
        meas_points=points[meas_idx],
        meas_magnitudes=np.abs(pressure[meas_idx]),
        test_points=points[test_idx],
        test_pressure=pressure[test_idx],
        lattice_shape=(lattice_n,) * 3,
        seed=int(seed),
        region_center=room.region_center,
    )


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def save_dataset(ds: FieldDataset, path: str | Path, room: RoomSpec,
                 sources: list[SourceSpec], max_order: int) -> None:
    """Write the CSV plus its JSON sidecar (deterministic byte-for-byte)."""
    path = Path(path)
    lines = ["x,y,z,magnitude,re,im,split"]
    for p, m in zip(ds.meas_points, ds.meas_magnitudes):
        lines.append(f"{_fmt(p[0])},{_fmt(p[1])},{_fmt(p[2])},{_fmt(m)},,,meas")
    for p, u in zip(ds.test_points, ds.test_pressure):
        lines.append(f"{_fmt(p[0])},{_fmt(p[1])},{_fmt(p[2])},{_fmt(abs(u))},"
                     f"{_fmt(u.real)},{_fmt(u.imag)},test")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    meta = {
        "room_dims": [float(v) for v in room.dims],
        "t60": room.t60,
        "speed_of_sound": room.speed_of_sound,
        "target_center": [float(v) for v in room.region_center],
        "frequency_hz": ds.frequency_hz,
        "wavenumber": ds.wavenumber,
        "lattice_n": ds.lattice_shape[0],
        "seed": ds.seed,
        "max_order": max_order,
        "sources": [
            {"position": [float(v) for v in s.position],
             "amplitude_re": s.amplitude.real, "amplitude_im": s.amplitude.imag}
            for s in sources
        ],
    }
    meta_path = path.with_name(path.stem + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_dataset(path: str | Path) -> tuple[FieldDataset, dict]:
    """Read a dataset CSV and its sidecar back into memory."""
    path = Path(path)
    meta_path = path.with_name(path.stem + ".meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))

    meas_p, meas_m, test_p, test_u = [], [], [], []
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "x,y,z,magnitude,re,im,split":
            raise ValueError(f"unrecognized dataset header in {path}: {header!r}")
        for line in fh:
            x, y, z, mag, re, im, split = line.rstrip("\n").split(",")
            p = (float(x), float(y), float(z))
            if split == "meas":
                meas_p.append(p)
                meas_m.append(float(mag))
            elif split == "test":
                test_p.append(p)
                test_u.append(complex(float(re), float(im)))
            else:
                raise ValueError(f"unknown split label {split!r} in {path}")

    n = meta["lattice_n"]
    return FieldDataset(
        frequency_hz=float(meta["frequency_hz"]),
        wavenumber=float(meta["wavenumber"]),
        meas_points=np.array(meas_p, dtype=float),
        meas_magnitudes=np.array(meas_m, dtype=float),
        test_points=np.array(test_p, dtype=float),
        test_pressure=np.array(test_u, dtype=complex),
        lattice_shape=(n, n, n),
        seed=int(meta["seed"]),
        region_center=np.asarray(meta["target_center"], dtype=float),
    ), meta


def sources_from_meta(meta: dict) -> list[SourceSpec]:
    return [
        SourceSpec(tuple(s["position"]),
                   complex(s["amplitude_re"], s["amplitude_im"]))
        for s in meta["sources"]
    ]


def room_from_meta(meta: dict) -> RoomSpec:
    return RoomSpec(
        dims=tuple(meta["room_dims"]),
        t60=float(meta["t60"]),
        speed_of_sound=float(meta["speed_of_sound"]),
        target_center=tuple(meta["target_center"]),
    )
