"""Two-stage depth networks: RGB -> sparse depth -> dense depth.

The sparse generator regresses LiDAR-like sparse depth from a colour image,
the dense generator completes any sparse depth map, and two conditional
critics (one per data domain) supply the adversarial signal. The package
also ships a procedural two-domain toy dataset, KITTI-style depth PNG I/O,
standard depth metrics and a nearest-neighbour completion baseline.
"""

from .errors import ConfigError, ShapeMismatchError
from .io import load_dataset, load_depth_png, save_dataset, save_depth_png
from .losses import LossReport, LossWeights, total_loss
from .metrics import completion_metrics, estimation_metrics, evaluate, nearest_neighbor_complete
from .networks import NetworkConfig, build_dense_generator, build_discriminator, build_sparse_generator
from .samples import Batch, Sample, make_sample, mixed_batch, sparsify, toy_dataset, toy_sample, validity_mask
from .scenes import SceneConfig, generate_scene, sample_sparsity_pattern
from .trainer import TrainConfig, TrainState, infer_complete, infer_estimate, load_state, save_state, train, train_step

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ConfigError",
    "LossReport",
    "LossWeights",
    "NetworkConfig",
    "Sample",
    "SceneConfig",
    "ShapeMismatchError",
    "TrainConfig",
    "TrainState",
    "build_dense_generator",
    "build_discriminator",
    "build_sparse_generator",
    "completion_metrics",
    "estimation_metrics",
    "evaluate",
    "generate_scene",
    "infer_complete",
    "infer_estimate",
    "load_dataset",
    "load_depth_png",
    "load_state",
    "make_sample",
    "mixed_batch",
    "nearest_neighbor_complete",
    "sample_sparsity_pattern",
    "save_dataset",
    "save_depth_png",
    "save_state",
    "sparsify",
    "toy_dataset",
    "toy_sample",
    "total_loss",
    "train",
    "train_step",
    "validity_mask",
]
