"""Transformer GAN for synthetic fall windows.

The generator maps latent noise to an 8x4 window through a linear
projection, learned positional embeddings and transformer encoder blocks;
the discriminator embeds each timestep as a patch, prepends a class token
and scores it with a linear head. Training uses the least-squares
adversarial objective. Inputs are min-max scaled per channel internally;
``sample`` returns windows in the caller's units.
"""
from __future__ import annotations

import hashlib
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from ..errors import CorruptArtifact, DivergedTraining, InsufficientFalls, VersionMismatch
from ..preprocessing import N_CHANNELS, WINDOW

ARTIFACT_FORMAT = "fdaas-generator"
ARTIFACT_VERSION = 1


@dataclass
class GanConfig:
    batch_size: int = 16
    weight_decay: float = 1e-3
    lr_generator: float = 2e-4
    lr_discriminator: float = 2e-4
    epochs: int = 60
    latent_dim: int = 64
    embed_dim: int = 64
    g_depth: int = 2
    d_depth: int = 2
    g_heads: int = 4
    d_heads: int = 4
    betas: tuple[float, float] = (0.5, 0.999)
    seed: int = 0

    def __post_init__(self) -> None:
        self.betas = tuple(self.betas)
        for name in ("batch_size", "lr_generator", "lr_discriminator", "epochs", "latent_dim",
                     "embed_dim", "g_depth", "d_depth", "g_heads", "d_heads"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.embed_dim % self.g_heads or self.embed_dim % self.d_heads:
            raise ValueError("embed_dim must be divisible by the head counts")


def _encoder(dim: int, heads: int, depth: int) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        dim, heads, dim_feedforward=4 * dim, dropout=0.0, activation="gelu", batch_first=True, norm_first=True
    )
    return nn.TransformerEncoder(layer, depth, enable_nested_tensor=False)


class Generator(nn.Module):
    def __init__(self, cfg: GanConfig, seq_len: int = WINDOW, channels: int = N_CHANNELS) -> None:
        super().__init__()
        self.seq_len, self.embed_dim = seq_len, cfg.embed_dim
        self.project = nn.Linear(cfg.latent_dim, seq_len * cfg.embed_dim)
        self.pos = nn.Parameter(torch.zeros(1, seq_len, cfg.embed_dim))
        nn.init.trunc_normal_(self.pos, std=0.02)
        self.blocks = _encoder(cfg.embed_dim, cfg.g_heads, cfg.g_depth)
        self.out = nn.Linear(cfg.embed_dim, channels)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        h = self.project(z).view(-1, self.seq_len, self.embed_dim) + self.pos
        return self.out(self.blocks(h))


class Discriminator(nn.Module):
    def __init__(self, cfg: GanConfig, seq_len: int = WINDOW, channels: int = N_CHANNELS) -> None:
        super().__init__()
        self.embed = nn.Linear(channels, cfg.embed_dim)
        self.cls = nn.Parameter(torch.zeros(1, 1, cfg.embed_dim))
        self.pos = nn.Parameter(torch.zeros(1, seq_len + 1, cfg.embed_dim))
        nn.init.trunc_normal_(self.pos, std=0.02)
        nn.init.trunc_normal_(self.cls, std=0.02)
        self.blocks = _encoder(cfg.embed_dim, cfg.d_heads, cfg.d_depth)
        self.head = nn.Sequential(nn.LayerNorm(cfg.embed_dim), nn.Linear(cfg.embed_dim, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.embed(x)
        h = torch.cat([self.cls.expand(len(h), -1, -1), h], dim=1) + self.pos
        return self.head(self.blocks(h)[:, 0]).squeeze(-1)


def fingerprint(X: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(X, dtype=np.float64).tobytes()).hexdigest()[:16]


@dataclass
class GeneratorArtifact:
    generator: Generator
    config: GanConfig
    lo: np.ndarray
    scale: np.ndarray
    data_fingerprint: str = ""
    history: list[tuple[float, float]] = field(default_factory=list)

    def scale_in(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.lo) / self.scale

    def scale_out(self, S: np.ndarray) -> np.ndarray:
        return np.asarray(S, dtype=np.float64) * self.scale + self.lo

    def sample_scaled(self, n: int, seed: int = 0) -> np.ndarray:
        """Samples in the generator's internal min-max space."""
        gen = torch.Generator().manual_seed(seed)
        z = torch.randn(n, self.config.latent_dim, generator=gen)
        self.generator.eval()
        with torch.no_grad():
            out = self.generator(z).double().numpy()
        return out

    def sample(self, n: int, seed: int = 0) -> np.ndarray:
        """``n`` windows of shape 8x4 in the units of the training data."""
        if n == 0:
            return np.zeros((0, WINDOW, N_CHANNELS))
        return self.scale_out(self.sample_scaled(n, seed))

    def save(self, path: str | Path) -> None:
        payload = {
            "format": ARTIFACT_FORMAT,
            "version": ARTIFACT_VERSION,
            "config": asdict(self.config),
            "lo": self.lo.tolist(),
            "scale": self.scale.tolist(),
            "data_fingerprint": self.data_fingerprint,
            "history": [list(h) for h in self.history],
            "state_dict": self.generator.state_dict(),
        }
        buf = io.BytesIO()
        torch.save(payload, buf)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> "GeneratorArtifact":
        try:
            payload = torch.load(Path(path), map_location="cpu", weights_only=True)
        except FileNotFoundError:
            raise
        except Exception as exc:
            raise CorruptArtifact(f"{path}: {exc}") from None
        if not isinstance(payload, dict) or payload.get("format") != ARTIFACT_FORMAT:
            raise CorruptArtifact(f"{path}: not a generator artifact")
        if payload.get("version") != ARTIFACT_VERSION:
            raise VersionMismatch(f"{path}: generator version {payload.get('version')}")
        cfg = GanConfig(**payload["config"])
        g = Generator(cfg)
        try:
            g.load_state_dict(payload["state_dict"])
        except (RuntimeError, KeyError) as exc:
            raise CorruptArtifact(f"{path}: {exc}") from None
        g.eval()
        return cls(
            g, cfg, np.asarray(payload["lo"]), np.asarray(payload["scale"]),
            payload.get("data_fingerprint", ""), [tuple(h) for h in payload.get("history", [])],
        )


def train_ts_generator(train_falls: np.ndarray, config: GanConfig = GanConfig()) -> GeneratorArtifact:
    """Adversarially fit a generator to (n, 8, 4) fall windows; the discriminator is discarded."""
    X = np.asarray(train_falls, dtype=np.float64)
    if X.ndim != 3 or X.shape[1:] != (WINDOW, N_CHANNELS):
        raise ValueError(f"expected (n, {WINDOW}, {N_CHANNELS}) windows, got {X.shape}")
    if len(X) < config.batch_size:
        raise InsufficientFalls(f"need at least {config.batch_size} fall windows, got {len(X)}")
    flat = X.reshape(-1, N_CHANNELS)
    lo = flat.min(axis=0)
    span = flat.max(axis=0) - lo
    scale = np.where(span > 0, span, 1.0)

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        G, D = Generator(config), Discriminator(config)
    gen = torch.Generator().manual_seed(config.seed + 1)
    opt_g = torch.optim.Adam(G.parameters(), lr=config.lr_generator, betas=config.betas, weight_decay=config.weight_decay)
    opt_d = torch.optim.Adam(D.parameters(), lr=config.lr_discriminator, betas=config.betas, weight_decay=config.weight_decay)
    mse = nn.MSELoss()
    data = torch.as_tensor((X - lo) / scale, dtype=torch.float32)
    history: list[tuple[float, float]] = []
    G.train()
    D.train()
    for epoch in range(config.epochs):
        perm = torch.randperm(len(data), generator=gen)
        d_tot = g_tot = 0.0
        batches = 0
        for s in range(0, len(perm) - config.batch_size + 1, config.batch_size):
            real = data[perm[s : s + config.batch_size]]
            z = torch.randn(len(real), config.latent_dim, generator=gen)
            fake = G(z)

            opt_d.zero_grad()
            d_loss = mse(D(real), torch.ones(len(real))) + mse(D(fake.detach()), torch.zeros(len(real)))
            d_loss.backward()
            opt_d.step()

            opt_g.zero_grad()
            g_loss = mse(D(fake), torch.ones(len(real)))
            g_loss.backward()
            opt_g.step()

            if not (torch.isfinite(d_loss) and torch.isfinite(g_loss)):
                raise DivergedTraining(f"GAN loss became non-finite at epoch {epoch + 1}")
            d_tot += d_loss.item()
            g_tot += g_loss.item()
            batches += 1
        history.append((d_tot / batches, g_tot / batches))
    G.eval()
    return GeneratorArtifact(G, config, lo, scale, fingerprint(X), history)
