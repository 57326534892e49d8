"""Rectified-flow training loop for the toy denoiser."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
import torch

from .data import Sample
from .flow import SchedulerConfig, augment_references, interpolate, rf_loss, sample_timestep
from .model import Denoiser, DenoiserConfig, denoise

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 3e-3
    steps: int = 500
    seed: int = 0
    batch_size: int = 8
    view_drop_prob: float = 0.3
    shuffle_views: bool = True
    grad_clip: float = 1.0
    cosine_decay: bool = True
    log_every: int = 50

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def seed_everything(seed: int) -> np.random.Generator:
    torch.manual_seed(seed)
    return np.random.default_rng(seed)


def make_optimizer(model: Denoiser, cfg: TrainConfig) -> torch.optim.Optimizer:
    return torch.optim.Adam(model.parameters(), lr=cfg.lr)


def sample_loss(
    model: Denoiser,
    sample: Sample,
    rng: np.random.Generator,
    sched: SchedulerConfig,
    cfg: TrainConfig,
    augment: bool = True,
) -> torch.Tensor:
    """Loss for one sample with training-time conditioning dropout applied."""
    refs, prompt = sample.refs, sample.prompt
    if augment:
        refs = augment_references(refs, rng, cfg.view_drop_prob, cfg.shuffle_views)
    # reference and text dropout are drawn independently
    p = model.cfg.cond_dropout
    if rng.random() < p:
        refs = None
    if rng.random() < p:
        prompt = None

    x0 = torch.from_numpy(sample.video.data)
    eps = torch.from_numpy(rng.standard_normal(x0.shape).astype(np.float32))
    t = sample_timestep(sched, rng)
    state = interpolate(x0, eps, t)
    pred = denoise(model, state.xt, t, refs, prompt)
    return rf_loss(pred, state)


def train_step(
    model: Denoiser,
    optimizer: torch.optim.Optimizer,
    batch: Sequence[Sample],
    cfg: TrainConfig,
    rng: np.random.Generator,
    sched: SchedulerConfig | None = None,
) -> float:
    sched = sched or SchedulerConfig(total_steps=model.cfg.total_steps)
    model.train()
    optimizer.zero_grad()
    loss = torch.stack([sample_loss(model, s, rng, sched, cfg) for s in batch]).mean()
    loss.backward()
    if cfg.grad_clip:
        torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
    optimizer.step()
    return float(loss.detach())


@torch.no_grad()
def evaluation_loss(model: Denoiser, samples: Sequence[Sample], seed: int = 1234, draws: int = 4) -> float:
    """Fully-conditioned loss on a fixed set of (t, noise) draws."""
    model.eval()
    rng = np.random.default_rng(seed)
    sched = SchedulerConfig(total_steps=model.cfg.total_steps)
    losses = []
    for _ in range(draws):
        for s in samples:
            x0 = torch.from_numpy(s.video.data)
            eps = torch.from_numpy(rng.standard_normal(x0.shape).astype(np.float32))
            t = sample_timestep(sched, rng)
            state = interpolate(x0, eps, t)
            losses.append(float(rf_loss(denoise(model, state.xt, t, s.refs, s.prompt), state)))
    return float(np.mean(losses))


def train(
    samples: Sequence[Sample],
    model_cfg: DenoiserConfig,
    cfg: TrainConfig,
    model: Denoiser | None = None,
) -> tuple[Denoiser, list[float]]:
    rng = seed_everything(cfg.seed)
    if model is None:
        model = Denoiser(model_cfg)
    optimizer = make_optimizer(model, cfg)
    scheduler = None
    if cfg.cosine_decay and cfg.steps > 1:
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=cfg.steps, eta_min=cfg.lr * 0.05)
    n = len(samples)
    losses = []
    for step in range(cfg.steps):
        if cfg.batch_size >= n:
            batch = samples
        else:
            batch = [samples[i] for i in rng.choice(n, cfg.batch_size, replace=False)]
        losses.append(train_step(model, optimizer, batch, cfg, rng))
        if scheduler is not None:
            scheduler.step()
        if cfg.log_every and (step % cfg.log_every == 0 or step == cfg.steps - 1):
            log.info("step %d loss %.5f", step, losses[-1])
    model.eval()
    return model, losses


def config_echo(model_cfg: DenoiserConfig, cfg: TrainConfig) -> dict:
    return {"model": asdict(model_cfg), "train": asdict(cfg)}
