from .bundle_io import load_bundle, save_bundle
from .ladder import (
    BundleEntry,
    PairBundle,
    TrainConfig,
    TrainingDivergedError,
    mean_mu_trace,
    train_ladder,
    train_one,
)
from .network import SemanticAutoencoder, loss, target_loss
from .optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "BundleEntry",
    "PairBundle",
    "SemanticAutoencoder",
    "TrainConfig",
    "TrainingDivergedError",
    "adam_step",
    "load_bundle",
    "loss",
    "mean_mu_trace",
    "save_bundle",
    "target_loss",
    "train_ladder",
    "train_one",
]
