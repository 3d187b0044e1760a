"""Reference interpolators the trained model is compared against."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import FieldDataset
from .training import TrainConfig


@dataclass(frozen=True)
class NnInterpolator:
    """Nearest-neighbor magnitude lookup over the measurement set."""

    points: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        if self.points.shape[0] == 0:
            raise ValueError("interpolator needs at least one measurement")

    @staticmethod
    def from_dataset(ds: FieldDataset) -> "NnInterpolator":
        return NnInterpolator(ds.meas_points.copy(), ds.meas_magnitudes.copy())


def nn_predict(interp: NnInterpolator, x: np.ndarray) -> np.ndarray:
    """Magnitude of the Euclidean-nearest measurement; ties go to the
    lowest measurement index (argmin returns the first minimum)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d2 = np.sum((x[:, None, :] - interp.points[None, :, :])**2, axis=2)
    return interp.magnitudes[np.argmin(d2, axis=1)]


def nf_baseline_config(base: TrainConfig) -> TrainConfig:
    """Data-loss-only variant of a training configuration."""
    return replace(base, lambda_pde=0.0)
