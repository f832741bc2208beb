from .augment import augment_to_balance
from .gan import GanConfig, GeneratorArtifact, train_ts_generator
from .resampling import random_oversample, smote
from .weights import ClassWeights, EnsConfig, ens_weights, ins_weights, weighted_focal_loss

__all__ = [
    "augment_to_balance",
    "GanConfig",
    "GeneratorArtifact",
    "train_ts_generator",
    "random_oversample",
    "smote",
    "ClassWeights",
    "EnsConfig",
    "ens_weights",
    "ins_weights",
    "weighted_focal_loss",
]
