"""Training loop, inference and detector artifacts."""
from __future__ import annotations

import io
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..errors import (
    CorruptArtifact,
    DivergedTraining,
    EmptyTrainingSet,
    MissingClass,
    ShapeMismatch,
    StatsMismatch,
    VersionMismatch,
)
from ..imbalance.weights import ClassWeights, weighted_focal_loss
from ..preprocessing import FALL, N_CHANNELS, WINDOW, StandardizationStats, WindowSet
from .architectures import ARCHITECTURES, build_model

log = logging.getLogger(__name__)

ARTIFACT_FORMAT = "fdaas-detector"
ARTIFACT_VERSION = 1
THRESHOLD = 0.5


@dataclass
class TrainConfig:
    batch_size: int = 64
    weight_decay: float = 1e-4
    learning_rate: float = 1e-5
    epochs: int = 100
    seed: int = 0
    class_weights: ClassWeights | None = None
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")
        if not (self.learning_rate > 0 and self.weight_decay >= 0):
            raise ValueError("learning_rate must be positive and weight_decay non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_weights"] = self.class_weights.to_dict() if self.class_weights else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if d.get("class_weights"):
            d["class_weights"] = ClassWeights.from_dict(d["class_weights"])
        return cls(**d)


@dataclass
class TrainedDetector:
    architecture: str
    model: nn.Module
    config: TrainConfig
    stats: StandardizationStats
    train_fingerprint: str = ""
    history: list[float] = field(default_factory=list)
    model_kwargs: dict = field(default_factory=dict)

    @property
    def stats_fingerprint(self) -> str:
        return self.stats.fingerprint


def _as_tensor(X: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    return torch.as_tensor(np.ascontiguousarray(X), dtype=dtype)


def loss_fn(config: TrainConfig):
    weights = config.class_weights
    gamma = config.gamma or 0.0

    def fn(logits: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        return weighted_focal_loss(logits, y, weights, gamma)

    return fn


def batch_order(n: int, batch_size: int, generator: torch.Generator) -> list[torch.Tensor]:
    """Shuffled minibatch indices; a trailing batch of one is dropped (batch norm needs two)."""
    perm = torch.randperm(n, generator=generator)
    batches = list(torch.split(perm, batch_size))
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches.pop()
    return batches


def train(
    model: nn.Module | str,
    train_windows: WindowSet,
    config: TrainConfig,
    stats: StandardizationStats | None = None,
    architecture: str | None = None,
) -> TrainedDetector:
    """Fit ``model`` on standardized windows with Adam for ``config.epochs`` epochs."""
    if isinstance(model, str):
        architecture = model
        model = build_model(model, seed=config.seed)
    architecture = architecture or _arch_name(model)
    if len(train_windows) == 0:
        raise EmptyTrainingSet("no training windows")
    if config.class_weights is None and len(np.unique(train_windows.y)) < 2:
        raise MissingClass("training needs both classes unless class weights are supplied")
    if stats is None:
        stats = StandardizationStats((0.0,) * N_CHANNELS, (1.0,) * N_CHANNELS)

    X = _as_tensor(train_windows.X)
    y = torch.as_tensor(train_windows.y, dtype=torch.long)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
    criterion = loss_fn(config)
    gen = torch.Generator().manual_seed(config.seed)
    history: list[float] = []
    model.train()
    for epoch in range(config.epochs):
        total, seen = 0.0, 0
        for idx in batch_order(len(X), config.batch_size, gen):
            opt.zero_grad()
            loss = criterion(model(X[idx]), y[idx])
            if not torch.isfinite(loss):
                raise DivergedTraining(f"non-finite loss at epoch {epoch + 1}")
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
            seen += len(idx)
        history.append(total / max(seen, 1))
        if not math.isfinite(history[-1]):
            raise DivergedTraining(f"non-finite loss at epoch {epoch + 1}")
    model.eval()
    return TrainedDetector(architecture, model, config, stats, train_windows.fingerprint(), history)


def _arch_name(model: nn.Module) -> str:
    name = type(model).__name__
    return "LSTM" if name == "LSTMClassifier" else name


def predict_proba(detector: TrainedDetector, windows: WindowSet | np.ndarray, batch_size: int = 1024) -> np.ndarray:
    """Fall probability per standardized window."""
    if isinstance(windows, WindowSet):
        if windows.standardized_with is not None and windows.standardized_with != detector.stats_fingerprint:
            raise StatsMismatch("windows were standardized with different statistics than the detector's")
        X = windows.X
    else:
        X = np.asarray(windows, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.shape[1:] != (WINDOW, N_CHANNELS):
        raise ShapeMismatch(f"expected windows of shape ({WINDOW}, {N_CHANNELS}), got {X.shape[1:]}")
    model = detector.model
    model.eval()
    dtype = next(model.parameters()).dtype
    out = []
    with torch.no_grad():
        for s in range(0, len(X), batch_size):
            logits = model(_as_tensor(X[s : s + batch_size], dtype))
            out.append(torch.softmax(logits, dim=-1)[:, FALL].double().numpy())
    return np.concatenate(out) if out else np.zeros(0)


def predict(detector: TrainedDetector, windows: WindowSet | np.ndarray) -> np.ndarray:
    """Hard labels: 1 (Fall) iff p >= 0.5."""
    return (predict_proba(detector, windows) >= THRESHOLD).astype(np.int64)


def predict_raw(detector: TrainedDetector, raw: np.ndarray) -> np.ndarray:
    """Standardize raw-unit windows with the detector's own stats, then score."""
    return predict_proba(detector, detector.stats.transform(raw))


def save_detector(detector: TrainedDetector, path: str | Path) -> None:
    payload = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "architecture": detector.architecture,
        "model_kwargs": detector.model_kwargs,
        "config": detector.config.to_dict(),
        "stats": detector.stats.to_dict(),
        "stats_fingerprint": detector.stats_fingerprint,
        "train_fingerprint": detector.train_fingerprint,
        "history": list(detector.history),
        "dtype": str(next(detector.model.parameters()).dtype),
        "state_dict": detector.model.state_dict(),
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(path)


def load_detector(path: str | Path, architecture: str | None = None) -> TrainedDetector:
    try:
        payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:  # torch raises assorted errors on truncated zips
        raise CorruptArtifact(f"{path}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != ARTIFACT_FORMAT:
        raise CorruptArtifact(f"{path}: not a detector artifact")
    if payload.get("version") != ARTIFACT_VERSION:
        raise VersionMismatch(f"{path}: artifact version {payload.get('version')} != {ARTIFACT_VERSION}")
    arch = payload["architecture"]
    if arch not in ARCHITECTURES:
        raise CorruptArtifact(f"{path}: unknown architecture {arch!r}")
    if architecture is not None and arch != architecture:
        raise CorruptArtifact(f"{path}: holds {arch}, expected {architecture}")
    model = build_model(arch, seed=None, **payload.get("model_kwargs", {}))
    if payload.get("dtype") == "torch.float64":
        model = model.double()
    try:
        model.load_state_dict(payload["state_dict"])
    except (RuntimeError, KeyError) as exc:
        raise CorruptArtifact(f"{path}: {exc}") from None
    model.eval()
    stats = StandardizationStats.from_dict(payload["stats"])
    if stats.fingerprint != payload["stats_fingerprint"]:
        raise CorruptArtifact(f"{path}: standardization stats do not match their fingerprint")
    return TrainedDetector(
        arch,
        model,
        TrainConfig.from_dict(payload["config"]),
        stats,
        payload.get("train_fingerprint", ""),
        list(payload.get("history", [])),
        dict(payload.get("model_kwargs", {})),
    )

