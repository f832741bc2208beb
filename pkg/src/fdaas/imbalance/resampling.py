"""Minority oversampling: random duplication and SMOTE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MissingClass, TooFewMinority
from ..preprocessing import ADL, FALL, WindowSet, concat


def _minority(train: WindowSet) -> tuple[np.ndarray, int]:
    """Indices of the minority class and how many windows are needed to reach parity."""
    n_adl = int(np.sum(train.y == ADL))
    n_fall = int(np.sum(train.y == FALL))
    if n_adl == 0 or n_fall == 0:
        raise MissingClass(f"both classes are required, got ADL={n_adl} Fall={n_fall}")
    minority = FALL if n_fall <= n_adl else ADL
    return np.flatnonzero(train.y == minority), abs(n_adl - n_fall)


def _append(train: WindowSet, src_idx: np.ndarray, X: np.ndarray) -> WindowSet:
    extra = train.subset(src_idx)
    extra.X = np.asarray(X, dtype=np.float64)
    extra.synthetic = np.ones(len(src_idx), dtype=bool)
    return concat([train, extra], provenance=train.provenance)


def random_oversample(train: WindowSet, seed: int = 0) -> WindowSet:
    """Duplicate minority windows (with replacement) until both classes are equal."""
    idx, need = _minority(train)
    if need == 0:
        return train
    rng = np.random.default_rng(seed)
    picks = idx[rng.integers(0, len(idx), size=need)]
    return _append(train, picks, train.X[picks])


@dataclass
class SmoteDraw:
    samples: np.ndarray
    seeds: np.ndarray
    neighbors: np.ndarray
    lam: np.ndarray


def smote_samples(X: np.ndarray, n: int, k: int, rng: np.random.Generator) -> SmoteDraw:
    """Draw ``n`` points x + lam * (x_nn - x) from the rows of ``X``.

    Rows are flattened; ``seeds``/``neighbors`` index into ``X``.
    """
    flat = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
    m = len(flat)
    if m < 2:
        raise TooFewMinority("SMOTE needs at least two minority samples")
    k = max(1, min(k, m - 1))
    sq = np.sum(flat**2, axis=1)
    dist = sq[:, None] + sq[None, :] - 2.0 * flat @ flat.T
    np.fill_diagonal(dist, np.inf)
    # stable sort keeps ties deterministic
    nn = np.argsort(dist, axis=1, kind="stable")[:, :k]
    seeds = rng.integers(0, m, size=n)
    neighbors = nn[seeds, rng.integers(0, k, size=n)]
    lam = rng.random(n)
    out = flat[seeds] + lam[:, None] * (flat[neighbors] - flat[seeds])
    return SmoteDraw(out.reshape((n,) + X.shape[1:]), seeds, neighbors, lam)


def smote(train: WindowSet, k_neighbors: int = 5, seed: int = 0, return_draw: bool = False):
    """Interpolate new minority windows between minority nearest neighbours until parity."""
    idx, need = _minority(train)
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    if len(idx) < 2:
        raise TooFewMinority("SMOTE needs at least two minority windows")
    if need == 0:
        empty = SmoteDraw(np.zeros((0,) + train.X.shape[1:]), np.zeros(0, int), np.zeros(0, int), np.zeros(0))
        return (train, empty) if return_draw else train
    rng = np.random.default_rng(seed)
    draw = smote_samples(train.X[idx], need, k_neighbors, rng)
    out = _append(train, idx[draw.seeds], draw.samples)
    if return_draw:
        draw.seeds = idx[draw.seeds]
        draw.neighbors = idx[draw.neighbors]
        return out, draw
    return out
