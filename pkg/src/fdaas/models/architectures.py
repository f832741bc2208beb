"""FCN, ResNet, LSTM and InceptionTime classifiers over 8x4 windows.

All networks take (batch, 8 timesteps, 4 channels) and return 2-way logits.
"""
from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ShapeMismatch, UnknownArchitecture
from ..preprocessing import N_CHANNELS, WINDOW

ARCHITECTURES = ("FCN", "ResNet", "LSTM", "InceptionTime")


def _check_input(x: torch.Tensor) -> None:
    if x.dim() != 3 or tuple(x.shape[1:]) != (WINDOW, N_CHANNELS):
        raise ShapeMismatch(f"expected input (batch, {WINDOW}, {N_CHANNELS}), got {tuple(x.shape)}")


class ConvBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, act: bool = True) -> None:
        super().__init__()
        self.conv = nn.Conv1d(c_in, c_out, kernel, padding="same")
        self.bn = nn.BatchNorm1d(c_out)
        self.act = nn.ReLU() if act else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.bn(self.conv(x)))


class FCN(nn.Module):
    def __init__(self, in_channels: int = N_CHANNELS, n_classes: int = 2,
                 filters=(128, 256, 128), kernels=(8, 5, 3)) -> None:
        super().__init__()
        layers, c = [], in_channels
        for f, k in zip(filters, kernels):
            layers.append(ConvBlock(c, f, k))
            c = f
        self.features = nn.Sequential(*layers)
        self.fc = nn.Linear(c, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x)
        h = self.features(x.transpose(1, 2))
        return self.fc(h.mean(dim=-1))


class ResidualBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, kernels=(8, 5, 3)) -> None:
        super().__init__()
        self.body = nn.Sequential(
            ConvBlock(c_in, c_out, kernels[0]),
            ConvBlock(c_out, c_out, kernels[1]),
            ConvBlock(c_out, c_out, kernels[2], act=False),
        )
        if c_in != c_out:
            self.shortcut = nn.Sequential(nn.Conv1d(c_in, c_out, 1), nn.BatchNorm1d(c_out))
        else:
            self.shortcut = nn.BatchNorm1d(c_out)
        self.act = nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.body(x) + self.shortcut(x))


class ResNet(nn.Module):
    def __init__(self, in_channels: int = N_CHANNELS, n_classes: int = 2, filters=(64, 128, 128)) -> None:
        super().__init__()
        blocks, c = [], in_channels
        for f in filters:
            blocks.append(ResidualBlock(c, f))
            c = f
        self.blocks = nn.Sequential(*blocks)
        self.fc = nn.Linear(c, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x)
        h = self.blocks(x.transpose(1, 2))
        return self.fc(h.mean(dim=-1))


class LSTMClassifier(nn.Module):
    def __init__(self, in_channels: int = N_CHANNELS, n_classes: int = 2, hidden: int = 64, layers: int = 2) -> None:
        super().__init__()
        self.lstm = nn.LSTM(in_channels, hidden, num_layers=layers, batch_first=True)
        self.fc = nn.Linear(hidden, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x)
        out, _ = self.lstm(x)
        return self.fc(out[:, -1])


class InceptionModule(nn.Module):
    def __init__(self, c_in: int, n_filters: int = 32, bottleneck: int = 32, kernels=(10, 20, 40)) -> None:
        super().__init__()
        if c_in > 1:
            self.bottleneck = nn.Conv1d(c_in, bottleneck, 1, bias=False)
            c_b = bottleneck
        else:
            self.bottleneck = nn.Identity()
            c_b = c_in
        self.branches = nn.ModuleList(
            nn.Conv1d(c_b, n_filters, k, padding="same", bias=False) for k in kernels
        )
        self.pool = nn.MaxPool1d(3, stride=1, padding=1)
        self.pool_conv = nn.Conv1d(c_in, n_filters, 1, bias=False)
        self.bn = nn.BatchNorm1d(n_filters * (len(kernels) + 1))
        self.act = nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        z = self.bottleneck(x)
        outs = [b(z) for b in self.branches]
        outs.append(self.pool_conv(self.pool(x)))
        return self.act(self.bn(torch.cat(outs, dim=1)))


class InceptionTime(nn.Module):
    """A single InceptionTime network (no ensemble)."""

    def __init__(self, in_channels: int = N_CHANNELS, n_classes: int = 2, depth: int = 6,
                 n_filters: int = 32, bottleneck: int = 32, kernels=(10, 20, 40)) -> None:
        super().__init__()
        width = n_filters * (len(kernels) + 1)
        self.modules_ = nn.ModuleList()
        self.shortcuts = nn.ModuleList()
        c = in_channels
        res_c = in_channels
        for d in range(depth):
            self.modules_.append(InceptionModule(c, n_filters, bottleneck, kernels))
            c = width
            if d % 3 == 2:
                self.shortcuts.append(nn.Sequential(nn.Conv1d(res_c, width, 1, bias=False), nn.BatchNorm1d(width)))
                res_c = width
        self.act = nn.ReLU()
        self.fc = nn.Linear(width, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_input(x)
        h = x.transpose(1, 2)
        res = h
        for d, m in enumerate(self.modules_):
            h = m(h)
            if d % 3 == 2:
                h = self.act(h + self.shortcuts[d // 3](res))
                res = h
        return self.fc(h.mean(dim=-1))


_REGISTRY = {"FCN": FCN, "ResNet": ResNet, "LSTM": LSTMClassifier, "InceptionTime": InceptionTime}


def build_model(architecture: str, seed: int | None = 0, **kwargs) -> nn.Module:
    """Fresh, untrained network; initialization is seeded without touching global RNG state."""
    try:
        cls = _REGISTRY[architecture]
    except KeyError:
        raise UnknownArchitecture(f"{architecture!r} is not one of {ARCHITECTURES}") from None
    if seed is None:
        return cls(**kwargs)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return cls(**kwargs)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
