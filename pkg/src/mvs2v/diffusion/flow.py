"""Rectified-flow objective, timestep sampling and reference augmentation.

Functions here accept numpy arrays or torch tensors interchangeably; only
elementwise arithmetic is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .data import ReferenceSet


@dataclass
class FlowState:
    x0: Any
    eps: Any
    t: float
    xt: Any
    ut: Any


@dataclass(frozen=True)
class SchedulerConfig:
    total_steps: int = 1000
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if not self.scale > 0:
            raise ValueError("logit-normal scale must be > 0")


def interpolate(x0, eps, t) -> FlowState:
    """Straight-line interpolant ``x_t = (1 - t) x0 + t eps`` with velocity ``eps - x0``."""
    if tuple(x0.shape) != tuple(eps.shape):
        raise ValueError(f"x0 shape {tuple(x0.shape)} != noise shape {tuple(eps.shape)}")
    t_val = float(t) if np.ndim(t) == 0 else t
    if np.ndim(t) == 0 and not 0.0 <= t_val <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t_val}")
    return FlowState(x0=x0, eps=eps, t=t_val, xt=(1 - t) * x0 + t * eps, ut=eps - x0)


def logit_normal_from_normal(z: float, cfg: SchedulerConfig = SchedulerConfig()) -> float:
    """Map a standard-normal draw to a timestep; sigmoid(location + scale * z)."""
    u = cfg.location + cfg.scale * z
    # numerically stable sigmoid
    if u >= 0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


def sample_timestep(cfg: SchedulerConfig, rng: np.random.Generator) -> float:
    t = logit_normal_from_normal(float(rng.standard_normal()), cfg)
    # keep strictly inside (0, 1) even for extreme draws
    return min(max(t, 1e-7), 1.0 - 1e-7)


def sample_timesteps(cfg: SchedulerConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    u = cfg.location + cfg.scale * rng.standard_normal(n)
    t = 0.5 * (1.0 + np.tanh(0.5 * u))
    return np.clip(t, 1e-7, 1.0 - 1e-7)


def timestep_index(t: float, cfg: SchedulerConfig = SchedulerConfig()) -> float:
    """Continuous t in [0, 1] rescaled to the discrete diffusion step range."""
    return t * cfg.total_steps


def rf_loss(pred, state: FlowState):
    if tuple(pred.shape) != tuple(state.ut.shape):
        raise ValueError(f"prediction shape {tuple(pred.shape)} != velocity shape {tuple(state.ut.shape)}")
    return ((pred - state.ut) ** 2).mean()


def augment_references(
    refs: ReferenceSet,
    rng: np.random.Generator,
    drop_prob: float = 0.5,
    shuffle: bool = True,
) -> ReferenceSet:
    """Randomly drop and reorder each subject's views.

    Each view survives independently with probability ``1 - drop_prob``;
    draws that would empty a subject are rejected and redrawn, so the kept
    count follows the binomial conditioned on being nonzero.
    """
    if not 0.0 <= drop_prob < 1.0:
        raise ValueError(f"drop_prob must lie in [0, 1), got {drop_prob}")
    out = []
    for i, views in enumerate(refs.subjects):
        if not views:
            raise ValueError(f"subject {i} has no reference views")
        if drop_prob > 0:
            while True:
                keep = rng.random(len(views)) >= drop_prob
                if keep.any():
                    break
            idx = np.flatnonzero(keep)
        else:
            idx = np.arange(len(views))
        if shuffle:
            idx = rng.permutation(idx)
        out.append([views[j] for j in idx])
    return ReferenceSet(out)
