"""Adam with bias correction, plus learning-rate schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import Tensor

BETAS = (0.95, 0.99)
EPSILON = 1e-9


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, Tensor] = field(default_factory=dict)
    v: dict[str, Tensor] = field(default_factory=dict)

    def state_dict(self) -> dict:
        return {"step": self.step, "m": dict(self.m), "v": dict(self.v)}

    @classmethod
    def from_state_dict(cls, data: dict) -> "AdamState":
        return cls(int(data["step"]), dict(data["m"]), dict(data["v"]))


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, Tensor],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = BETAS,
    eps: float = EPSILON,
) -> tuple[dict[str, Tensor], AdamState]:
    """One Adam update; returns new parameter tensors and a new state.

    Parameters without a gradient entry are passed through untouched.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    b1, b2 = betas
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ValueError(f"gradient for {name} has shape {tuple(g.shape)}, expected {tuple(params[name].shape)}")
        if not bool(torch.isfinite(g).all()):
            raise NonFiniteGradient(f"non-finite gradient for {name}")

    t = state.step + 1
    correction1 = 1 - b1**t
    correction2 = 1 - b2**t
    new_params, new_m, new_v = dict(params), dict(state.m), dict(state.v)
    for name, g in grads.items():
        p = params[name]
        m = state.m.get(name, torch.zeros_like(p))
        v = state.v.get(name, torch.zeros_like(p))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        denom = (v / correction2).sqrt() + eps
        new_params[name] = p - lr * (m / correction1) / denom
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(t, new_m, new_v)


class PlateauHalving:
    """Halve the rate when the smoothed loss stops improving for ``patience`` iterations."""

    def __init__(self, lr: float = 1e-4, patience: int = 25, floor: float = 1e-6,
                 smoothing: float = 0.9, min_delta: float = 1e-4):
        self.lr = lr
        self.patience = patience
        self.floor = floor
        self.smoothing = smoothing
        self.min_delta = min_delta
        self.smoothed: float | None = None
        self.best = math.inf
        self.stale = 0

    def step_lr(self, step: int) -> float:
        return self.lr

    def observe(self, loss: float) -> float:
        """Record one iteration's loss; returns the rate for the next iteration."""
        if self.smoothed is None:
            self.smoothed = loss
        else:
            self.smoothed = self.smoothing * self.smoothed + (1 - self.smoothing) * loss
        if self.smoothed < self.best * (1 - self.min_delta):
            self.best = self.smoothed
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr = max(self.lr / 2, self.floor)
                self.stale = 0
        return self.lr

    def state_dict(self) -> dict:
        return {"lr": self.lr, "smoothed": self.smoothed, "best": self.best, "stale": self.stale}


class InverseSqrtWarmup:
    """``d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)``, optionally scaled."""

    def __init__(self, d_model: int, warmup: int = 4000, scale: float = 1.0):
        self.d_model = d_model
        self.warmup = warmup
        self.scale = scale
        self.lr = self.step_lr(1)

    def step_lr(self, step: int) -> float:
        step = max(step, 1)
        self.lr = self.scale * self.d_model**-0.5 * min(step**-0.5, step * self.warmup**-1.5)
        return self.lr

    def observe(self, loss: float) -> float:
        return self.lr

    def state_dict(self) -> dict:
        return {"lr": self.lr}
