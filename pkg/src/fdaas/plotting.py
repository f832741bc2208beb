"""Figure rendering for reports: real-vs-synthetic projections and result tables."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import feature_matrix, pca_2d, tsne_2d  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_projection(real: np.ndarray, synthetic: np.ndarray, path: str | Path, method: str = "PCA",
                    seed: int = 0, title: str | None = None) -> Path:
    """Scatter real and synthetic windows in one joint 2-D projection of their feature vectors."""
    feats = np.vstack([feature_matrix(real), feature_matrix(synthetic)])
    proj = pca_2d(feats) if method.upper() == "PCA" else tsne_2d(feats, seed)
    pts = proj.points
    n = len(real)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    ax.scatter(pts[:n, 0], pts[:n, 1], s=12, alpha=0.7, label="real", color="tab:blue")
    ax.scatter(pts[n:, 0], pts[n:, 1], s=12, alpha=0.7, label="synthetic", color="tab:orange", marker="x")
    ax.set_title(title or f"{proj.method}: real vs synthetic falls")
    ax.legend()
    return _save(fig, path)


def plot_grid_bars(table: dict[str, dict[str, float | None]], path: str | Path, metric: str = "F1") -> Path:
    """Grouped bars: one group per architecture, one bar per strategy."""
    archs = list(table)
    strategies = list(dict.fromkeys(s for row in table.values() for s in row))
    width = 0.8 / max(len(strategies), 1)
    x = np.arange(len(archs))
    fig, ax = plt.subplots(figsize=(1.6 * len(archs) + 3, 4))
    for i, s in enumerate(strategies):
        vals = [100.0 * (table[a].get(s) or 0.0) for a in archs]
        ax.bar(x + (i - (len(strategies) - 1) / 2) * width, vals, width, label=s)
    ax.set_xticks(x, archs)
    ax.set_ylabel(f"{metric} (%)")
    ax.set_ylim(0, 100)
    ax.legend(ncol=3, fontsize="small")
    return _save(fig, path)


def plot_grid_heatmap(table: dict[str, dict[str, float | None]], path: str | Path, metric: str = "F1") -> Path:
    archs = list(table)
    strategies = list(dict.fromkeys(s for row in table.values() for s in row))
    M = np.array([[np.nan if table[a].get(s) is None else 100.0 * table[a][s] for s in strategies] for a in archs])
    fig, ax = plt.subplots(figsize=(1.1 * len(strategies) + 2, 0.6 * len(archs) + 1.5))
    im = ax.imshow(M, cmap="viridis", vmin=0, vmax=100)
    ax.set_xticks(range(len(strategies)), strategies)
    ax.set_yticks(range(len(archs)), archs)
    for i in range(len(archs)):
        for j in range(len(strategies)):
            if np.isfinite(M[i, j]):
                ax.text(j, i, f"{M[i, j]:.1f}", ha="center", va="center", color="w" if M[i, j] < 60 else "k")
    ax.set_title(metric)
    fig.colorbar(im, ax=ax)
    return _save(fig, path)
