"""Adam with bias correction and a cosine learning-rate schedule over epochs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def cosine_lr(base_lr: float, epoch: int, total_epochs: int) -> float:
    """base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs)), clamped at the end."""
    frac = min(max(epoch, 0), total_epochs) / total_epochs
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * frac))


@dataclass
class AdamState:
    base_lr: float
    total_epochs: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    # Per-parameter-group learning-rate multipliers (e.g. a slow group for
    # embeddings); groups absent from the map use the base rate.
    lr_scales: dict[str, float] = field(default_factory=dict)
    m: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    v: dict[str, np.ndarray] = field(default_factory=dict, repr=False)


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray], epoch: int) -> None:
    """One in-place Adam update of every entry in ``params``."""
    state.step_count += 1
    t = state.step_count
    lr = cosine_lr(state.base_lr, epoch, state.total_epochs)
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        lr_name = lr * state.lr_scales.get(name, 1.0)
        p -= (lr_name / bc1) * m / (np.sqrt(v / bc2) + state.eps)
    return None
