"""Finite-difference gradient checking that skips points where a step crosses a ReLU or max-pool kink."""
from __future__ import annotations

import copy

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from fdaas.imbalance.weights import weighted_focal_loss


class _Switches:
    """Record which side of every piecewise-linear switch each activation falls on."""

    def __init__(self, model: nn.Module) -> None:
        self.pattern: list[torch.Tensor] = []
        self.handles = []
        for m in model.modules():
            if isinstance(m, nn.ReLU):
                self.handles.append(m.register_forward_hook(lambda _m, inp, _out: self.pattern.append(inp[0] > 0)))
            elif isinstance(m, nn.MaxPool1d):
                self.handles.append(m.register_forward_hook(self._pool_hook))

    def _pool_hook(self, m, inp, _out) -> None:
        _, idx = F.max_pool1d(inp[0], m.kernel_size, m.stride, m.padding, return_indices=True)
        self.pattern.append(idx)

    def run(self, fn):
        self.pattern = []
        value = fn()
        return value, list(self.pattern)

    def close(self) -> None:
        for h in self.handles:
            h.remove()


def _same(a: list[torch.Tensor], b: list[torch.Tensor]) -> bool:
    return len(a) == len(b) and all(torch.equal(x, y) for x, y in zip(a, b))


def gradient_check(model: nn.Module, X: torch.Tensor, y: torch.Tensor, n_params: int = 20, step: float = 1e-4,
                   seed: int = 0, max_draws: int = 2000) -> list[dict]:
    """Compare ``model``'s autograd gradient with a float64 central difference on a copy of it.

    Scalar parameters are drawn uniformly over all parameter entries. A draw is
    rejected when the +/- step changes any switch pattern, because the loss is
    not differentiable across that interval.
    """
    dtype = next(model.parameters()).dtype
    model.zero_grad()
    weighted_focal_loss(model(X.to(dtype)), y, None, 0.0).backward()
    ref = copy.deepcopy(model).double()
    ref.load_state_dict({k: v.double() if v.is_floating_point() else v for k, v in model.state_dict().items()})
    X64 = X.double()
    names = [n for n, _ in model.named_parameters()]
    grads = dict(model.named_parameters())
    params = dict(ref.named_parameters())
    sizes = np.array([grads[n].numel() for n in names])
    offsets = np.cumsum(sizes)
    rng = np.random.default_rng(seed)
    switches = _Switches(ref)

    def loss() -> float:
        return weighted_focal_loss(ref(X64), y, None, 0.0).item()

    results: list[dict] = []
    try:
        with torch.no_grad():
            _, base = switches.run(loss)
            for _ in range(max_draws):
                if len(results) == n_params:
                    break
                k = int(rng.integers(offsets[-1]))
                j = int(np.searchsorted(offsets, k, side="right"))
                i = k - int(offsets[j] - sizes[j])
                flat = params[names[j]].view(-1)
                orig = flat[i].item()
                flat[i] = orig + step
                lp, pp = switches.run(loss)
                flat[i] = orig - step
                lm, pm = switches.run(loss)
                flat[i] = orig
                if not (_same(base, pp) and _same(base, pm)):
                    continue
                numeric = (lp - lm) / (2 * step)
                analytic = grads[names[j]].grad.view(-1)[i].item()
                denom = max(abs(numeric), abs(analytic))
                results.append({
                    "param": names[j], "index": i, "analytic": analytic, "numeric": numeric,
                    "rel_error": abs(numeric - analytic) / denom if denom > 0 else 0.0,
                })
    finally:
        switches.close()
    return results
