"""Class weights (inverse and effective number of samples) and the weighted focal loss."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ZeroCount

CLASSES = ("ADL", "Fall")


@dataclass(frozen=True)
class EnsConfig:
    beta: float = 0.9999
    gamma: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights, normalized so the count-weighted mean is 1."""

    adl: float
    fall: float
    method: str

    def __post_init__(self) -> None:
        if not (self.adl > 0 and self.fall > 0):
            raise ValueError("class weights must be positive")
        if self.method not in ("INS", "ENS"):
            raise ValueError("method is INS or ENS")

    @property
    def ratio(self) -> float:
        """Fall weight over ADL weight."""
        return self.fall / self.adl

    def as_tensor(self, dtype=torch.float32) -> torch.Tensor:
        return torch.tensor([self.adl, self.fall], dtype=dtype)

    def to_dict(self) -> dict:
        return {"ADL": self.adl, "Fall": self.fall, "method": self.method}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassWeights":
        return cls(float(d["ADL"]), float(d["Fall"]), str(d["method"]))


def _counts(counts: Mapping[str, int]) -> np.ndarray:
    n = np.array([counts["ADL"], counts["Fall"]], dtype=np.float64)
    if np.any(n < 1):
        raise ZeroCount(f"every class needs at least one sample, got {dict(counts)}")
    return n


def _normalize(raw: np.ndarray, n: np.ndarray) -> np.ndarray:
    return raw * n.sum() / np.dot(raw, n)


def ins_weights(counts: Mapping[str, int]) -> ClassWeights:
    n = _counts(counts)
    w = _normalize(1.0 / n, n)
    return ClassWeights(float(w[0]), float(w[1]), "INS")


def effective_number(n, beta: float):
    return (1.0 - np.power(beta, n)) / (1.0 - beta)


def ens_weights(counts: Mapping[str, int], config: EnsConfig = EnsConfig()) -> ClassWeights:
    """Weights proportional to 1 / effective number (1 - beta^n) / (1 - beta)."""
    n = _counts(counts)
    w = _normalize(1.0 / effective_number(n, config.beta), n)
    return ClassWeights(float(w[0]), float(w[1]), "ENS")


def weighted_focal_loss(
    logits: torch.Tensor,
    labels: torch.Tensor,
    weights: ClassWeights | torch.Tensor | None = None,
    gamma: float = 2.0,
) -> torch.Tensor:
    """Batch mean of w_y * (1 - p_y)^gamma * -log p_y with p from a softmax."""
    logp = F.log_softmax(logits, dim=-1)
    logp_y = logp.gather(-1, labels.long().unsqueeze(-1)).squeeze(-1)
    loss = -logp_y
    if gamma:
        loss = (1.0 - logp_y.exp()).clamp_min(0.0).pow(gamma) * loss
    if weights is not None:
        w = weights.as_tensor(logits.dtype) if isinstance(weights, ClassWeights) else weights.to(logits.dtype)
        loss = w[labels.long()] * loss
    return loss.mean()
