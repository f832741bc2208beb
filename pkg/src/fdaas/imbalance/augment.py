"""Balance a training split with one of the oversampling strategies."""
from __future__ import annotations

import numpy as np

from ..errors import MissingClass, StatsMismatch
from ..preprocessing import FALL, WindowSet, concat
from .gan import GanConfig, GeneratorArtifact, train_ts_generator
from .resampling import random_oversample, smote

RESAMPLING = ("ROS", "SMOTE", "GAN")


def augment_to_balance(
    train: WindowSet,
    strategy: str,
    seed: int = 0,
    generator: GeneratorArtifact | None = None,
    gan_config: GanConfig | None = None,
    k_neighbors: int = 5,
) -> WindowSet:
    """Add minority (Fall) windows until the classes are equal. Only training splits are accepted."""
    if train.provenance == "test":
        raise StatsMismatch("augmentation is applied to the training split only")
    strategy = strategy.upper()
    if strategy == "ROS":
        return random_oversample(train, seed)
    if strategy == "SMOTE":
        return smote(train, k_neighbors, seed)
    if strategy != "GAN":
        raise ValueError(f"unknown resampling strategy {strategy!r}; expected one of {RESAMPLING}")
    falls = np.flatnonzero(train.y == FALL)
    n_adl = len(train) - len(falls)
    if len(falls) == 0 or n_adl == 0:
        raise MissingClass("both classes are required")
    need = n_adl - len(falls)
    if need <= 0:
        return train
    if generator is None:
        cfg = gan_config or GanConfig(seed=seed)
        generator = train_ts_generator(train.X[falls], cfg)
    synth = generator.sample(need, seed=seed)
    src = falls[np.arange(need) % len(falls)]
    extra = train.subset(src)
    extra.X = synth
    extra.codes = np.array(["GAN"] * need, dtype=object)
    extra.synthetic = np.ones(need, dtype=bool)
    return concat([train, extra], provenance=train.provenance)
