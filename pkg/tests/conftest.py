"""Shared test setup.

BLAS thread limits are pinned to one before numpy loads: the suite's
matrices are small enough that threading only adds latency, and a fixed
thread count keeps reductions bit-for-bit reproducible.
"""

import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from magfield import RoomSpec, SourceSpec, make_dataset  # noqa: E402

REFERENCE_ROOM = dict(dims=(3.0, 4.0, 6.0), t60=0.2, speed_of_sound=343.0)


@pytest.fixture(scope="session")
def reference_room() -> RoomSpec:
    return RoomSpec(**REFERENCE_ROOM)


@pytest.fixture(scope="session")
def small_dataset(reference_room):
    """9^3 lattice, one interior source, 200 Hz; shared by several modules."""
    src = SourceSpec((0.5, 0.8, 1.2), amplitude=1.0 + 0.0j)
    return make_dataset(reference_room, [src], 200.0, lattice_n=9,
                        num_measurements=20, max_order=4, seed=7)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(a), np.abs(b))
    return np.abs(a - b) / np.where(scale > 0, scale, 1.0)


def check_jet_against_fd(fd_grad, fd_lap, jet, rtol, floor=1e-8):
    """Gradcheck-style comparison: per point, errors are measured relative
    to that point's derivative magnitude (entries of all-but-vanished jets
    are skipped)."""
    scale = np.maximum(np.max(np.abs(fd_grad), axis=1), np.abs(fd_lap))
    scale = np.maximum(scale, floor)
    grad_err = np.abs(fd_grad - jet.grad) / scale[:, None]
    lap_err = np.abs(fd_lap - jet.lap) / scale
    assert np.max(grad_err) < rtol, f"gradient mismatch: {np.max(grad_err):.3e}"
    assert np.max(lap_err) < rtol, f"laplacian mismatch: {np.max(lap_err):.3e}"
