"""Imbalance-aware detection metrics, augmentation fidelity and 2-D projections.

``f1_sens_spec`` is the harmonic mean of sensitivity and specificity. The
conventional precision/recall F1 is available as ``f1_precision_recall``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import EmptySet, LengthMismatch, TooFewPoints, UndefinedMetric, ZeroVector
from .preprocessing import FALL, N_CHANNELS, WINDOW

FEATURE_NAMES = ("mean", "median", "std", "var", "rms", "min", "max")
N_FEATURES = len(FEATURE_NAMES) * N_CHANNELS


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return asdict(self)


def confusion(labels_true: Sequence[int], labels_pred: Sequence[int]) -> ConfusionMatrix:
    """Counts with Fall (1) as the positive class."""
    t = np.asarray(labels_true).astype(np.int64).ravel()
    p = np.asarray(labels_pred).astype(np.int64).ravel()
    if len(t) != len(p):
        raise LengthMismatch(f"{len(t)} labels vs {len(p)} predictions")
    if len(t) == 0:
        raise EmptySet("no labels to score")
    pos_t, pos_p = t == FALL, p == FALL
    return ConfusionMatrix(
        tp=int(np.sum(pos_t & pos_p)),
        fp=int(np.sum(~pos_t & pos_p)),
        tn=int(np.sum(~pos_t & ~pos_p)),
        fn=int(np.sum(pos_t & ~pos_p)),
    )


def sensitivity(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fn == 0:
        raise UndefinedMetric("sensitivity undefined without positive samples")
    return cm.tp / (cm.tp + cm.fn)


def specificity(cm: ConfusionMatrix) -> float:
    if cm.tn + cm.fp == 0:
        raise UndefinedMetric("specificity undefined without negative samples")
    return cm.tn / (cm.tn + cm.fp)


def f1_sens_spec(cm: ConfusionMatrix) -> float:
    se, sp = sensitivity(cm), specificity(cm)
    if se + sp == 0:
        raise UndefinedMetric("sensitivity + specificity is zero")
    return 2.0 * se * sp / (se + sp)


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    return (sensitivity(cm) + specificity(cm)) / 2.0


def precision(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fp == 0:
        raise UndefinedMetric("precision undefined without positive predictions")
    return cm.tp / (cm.tp + cm.fp)


def f1_precision_recall(cm: ConfusionMatrix) -> float:
    pr, rc = precision(cm), sensitivity(cm)
    if pr + rc == 0:
        raise UndefinedMetric("precision + recall is zero")
    return 2.0 * pr * rc / (pr + rc)


def _maybe(fn, cm):
    try:
        return fn(cm)
    except UndefinedMetric:
        return None


@dataclass
class MetricsReport:
    confusion: ConfusionMatrix
    sensitivity: float | None
    specificity: float | None
    f1: float | None
    balanced_accuracy: float | None
    precision: float | None = None
    f1_pr: float | None = None
    architecture: str = ""
    strategy: str = ""

    @classmethod
    def from_labels(cls, y_true, y_pred, architecture: str = "", strategy: str = "") -> "MetricsReport":
        cm = confusion(y_true, y_pred)
        return cls(
            cm,
            _maybe(sensitivity, cm),
            _maybe(specificity, cm),
            _maybe(f1_sens_spec, cm),
            _maybe(balanced_accuracy, cm),
            _maybe(precision, cm),
            _maybe(f1_precision_recall, cm),
            architecture,
            strategy,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = self.confusion.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        d = dict(d)
        d["confusion"] = ConfusionMatrix(**d["confusion"])
        return cls(**d)


# --------------------------------------------------------------------------
# augmentation fidelity


def feature_vector(window: np.ndarray) -> np.ndarray:
    """28 statistics, channel-major: (mean, median, std, var, rms, min, max) per channel.

    std/var are population statistics.
    """
    w = np.asarray(window, dtype=np.float64)
    if w.shape != (WINDOW, N_CHANNELS):
        raise ValueError(f"window must be {WINDOW}x{N_CHANNELS}, got {w.shape}")
    return feature_matrix(w[None])[0]


def feature_matrix(windows: np.ndarray) -> np.ndarray:
    """Row-wise ``feature_vector`` for an (n, 8, 4) stack."""
    w = np.asarray(windows, dtype=np.float64)
    feats = np.stack(
        [
            w.mean(axis=1),
            np.median(w, axis=1),
            w.std(axis=1),
            w.var(axis=1),
            np.sqrt(np.mean(w**2, axis=1)),
            w.min(axis=1),
            w.max(axis=1),
        ],
        axis=2,
    )  # (n, channel, stat)
    return feats.reshape(len(w), N_FEATURES)


def cosine_similarity(fa: np.ndarray, fb: np.ndarray) -> float:
    a = np.asarray(fa, dtype=np.float64).ravel()
    b = np.asarray(fb, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.dot(a, b) / (na * nb))


def avg_cosine_similarity(
    real: np.ndarray,
    synthetic: np.ndarray,
    pairing: str = "matched",
    seed: int = 0,
    n_pairings: int = 10,
) -> float:
    """Mean cosine similarity between real and synthetic feature vectors.

    ``matched``: seeded random one-to-one pairs over min(|real|, |synthetic|),
    averaged over ``n_pairings`` draws. ``identity``: row i with row i.
    ``all``: every real x synthetic pair.
    """
    real = np.asarray(real, dtype=np.float64)
    synthetic = np.asarray(synthetic, dtype=np.float64)
    if len(real) == 0 or len(synthetic) == 0:
        raise EmptySet("both sample sets must be non-empty")
    fa, fb = feature_matrix(real), feature_matrix(synthetic)
    na, nb = np.linalg.norm(fa, axis=1), np.linalg.norm(fb, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ZeroVector("a sample has an all-zero feature vector")
    ua, ub = fa / na[:, None], fb / nb[:, None]
    if pairing == "all":
        return float(np.mean(ua @ ub.T))
    n = min(len(ua), len(ub))
    if pairing == "identity":
        return float(np.mean(np.sum(ua[:n] * ub[:n], axis=1)))
    if pairing != "matched":
        raise ValueError(f"unknown pairing {pairing!r}")
    rng = np.random.default_rng(seed)
    scores = []
    for _ in range(n_pairings):
        ia = rng.permutation(len(ua))[:n]
        ib = rng.permutation(len(ub))[:n]
        scores.append(np.mean(np.sum(ua[ia] * ub[ib], axis=1)))
    return float(np.mean(scores))


# --------------------------------------------------------------------------
# 2-D projections


@dataclass
class Projection:
    points: np.ndarray
    method: str
    components: np.ndarray | None = None
    center: np.ndarray | None = None


def pca_2d(features: np.ndarray) -> Projection:
    """Project rows onto the top-2 eigenvectors of their covariance."""
    F = np.asarray(features, dtype=np.float64)
    if len(F) < 3:
        raise TooFewPoints("projection needs at least 3 points")
    center = F.mean(axis=0)
    C = np.cov(F - center, rowvar=False)
    vals, vecs = np.linalg.eigh(np.atleast_2d(C))
    top = vecs[:, np.argsort(vals)[::-1][:2]]
    # fix the sign: largest-magnitude loading positive
    signs = np.sign(top[np.argmax(np.abs(top), axis=0), np.arange(top.shape[1])])
    top = top * np.where(signs == 0, 1.0, signs)
    return Projection((F - center) @ top, "PCA", top.T, center)


def tsne_2d(features: np.ndarray, seed: int = 0, perplexity: float = 30.0) -> Projection:
    from sklearn.manifold import TSNE

    F = np.asarray(features, dtype=np.float64)
    if len(F) < 3:
        raise TooFewPoints("projection needs at least 3 points")
    perplexity = min(perplexity, max(1.0, (len(F) - 1) / 3.0))
    emb = TSNE(n_components=2, perplexity=perplexity, random_state=seed, init="pca").fit_transform(F)
    return Projection(np.asarray(emb), "tSNE")


def project_2d(windows: np.ndarray, method: str = "PCA", seed: int = 0) -> Projection:
    """Feature-vector projection of (n, 8, 4) windows."""
    feats = feature_matrix(windows)
    if method.upper() == "PCA":
        return pca_2d(feats)
    if method.lower() in ("tsne", "t-sne"):
        return tsne_2d(feats, seed)
    raise ValueError(f"unknown projection {method!r}")
