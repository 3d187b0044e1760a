"""Estimation of acoustic magnitude fields from sparse magnitude measurements.

The package provides a shoebox-room image-source simulator for ground-truth
fields, a two-network field model trained against both the measured
magnitudes and the Helmholtz equation, data-only and nearest-neighbor
baselines, and the evaluation/rendering tooling to compare them.
"""

from .baselines import NnInterpolator, nf_baseline_config, nn_predict
from .dataset import FieldDataset, load_dataset, make_dataset, save_dataset
from .errors import NumericsError, TrainingAborted
from .evaluate import Metrics, PlaneSpec, render_slice, residual_stats, test_lsd
from .jets import Jet
from .model import (ComplexJet, LossBreakdown, PrbModel, data_loss,
                    helmholtz_residual, load_model, pde_loss, reconstruct,
                    residual_from_parts, save_model, total_loss)
from .network import MlpParams, RffMatrix, forward_jet, forward_values, rff_embed
from .room import (ImageSource, RoomSpec, SourceSpec, enumerate_images,
                   greens_sum, random_source, reflection_coeff_from_t60,
                   synthesize_field)
from .training import (OptimizerState, TrainConfig, TrainLog, adamw_step,
                       collocation_batch, lr_at, sample_collocation, train)

__version__ = "0.1.0"

__all__ = [
    "ComplexJet", "FieldDataset", "ImageSource", "Jet", "LossBreakdown",
    "Metrics", "MlpParams", "NnInterpolator", "NumericsError",
    "OptimizerState", "PlaneSpec", "PrbModel", "RffMatrix", "RoomSpec",
    "SourceSpec", "TrainConfig", "TrainLog", "TrainingAborted", "adamw_step",
    "collocation_batch", "data_loss", "enumerate_images", "forward_jet",
    "forward_values", "greens_sum", "helmholtz_residual", "load_dataset",
    "load_model", "lr_at", "make_dataset", "nf_baseline_config", "nn_predict",
    "pde_loss", "random_source", "reconstruct", "reflection_coeff_from_t60",
    "render_slice", "residual_from_parts", "residual_stats", "rff_embed",
    "sample_collocation", "save_dataset", "save_model", "synthesize_field",
    "test_lsd", "total_loss", "train",
]
