"""Toy diffusion transformer conditioned on multi-view references and text.

Video and reference latents are patchified (1x1 patches, so one token per
latent pixel), merged into one token sequence and processed by DiT blocks
with 3D rotary self-attention. Text enters through cross-attention. Only
the video tokens are projected back to a velocity field.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..layout import (
    DEFAULT_DELTA,
    LatentGrid,
    LayoutScheme,
    ReferenceShape,
    TokenLayout,
    cached_layout,
    rope_frequencies,
)
from .data import VOCAB, Prompt, ReferenceSet
from .flow import SchedulerConfig

MAX_PROMPT_LEN = 32


@dataclass(frozen=True)
class DenoiserConfig:
    channels: int = 3
    layers: int = 3
    heads: int = 2
    head_dim: int = 32
    mlp_ratio: int = 2
    vocab_size: int = len(VOCAB)
    scheme: str = LayoutScheme.TS.value
    delta: int = DEFAULT_DELTA
    cond_dropout: float = 0.1
    time_freq_dim: int = 64
    total_steps: int = 1000

    def __post_init__(self):
        if self.head_dim % 2:
            raise ValueError(f"head_dim must be even, got {self.head_dim}")
        if not 0.0 <= self.cond_dropout < 1.0:
            raise ValueError(f"cond_dropout must lie in [0, 1), got {self.cond_dropout}")
        object.__setattr__(self, "scheme", LayoutScheme.parse(self.scheme).value)
        if self.delta < 1:
            raise ValueError(f"delta must be >= 1, got {self.delta}")

    @property
    def hidden(self) -> int:
        return self.heads * self.head_dim

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def timestep_embedding(steps: torch.Tensor, dim: int, max_period: float = 10000.0) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(max_period) * torch.arange(half, dtype=torch.float32) / half)
    args = steps.float()[:, None] * freqs[None]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=-1)


def rotate(x: torch.Tensor, cos: torch.Tensor, sin: torch.Tensor) -> torch.Tensor:
    """Interleaved-pair rotation; same convention as ``layout.apply_rope``."""
    even, odd = x[..., 0::2], x[..., 1::2]
    out = torch.stack([even * cos - odd * sin, even * sin + odd * cos], dim=-1)
    return out.flatten(-2)


def modulate(x: torch.Tensor, shift: torch.Tensor, scale: torch.Tensor) -> torch.Tensor:
    return x * (1 + scale) + shift


class SelfAttention(nn.Module):
    def __init__(self, hidden: int, heads: int):
        super().__init__()
        self.heads = heads
        self.qkv = nn.Linear(hidden, 3 * hidden)
        self.q_norm = nn.LayerNorm(hidden // heads, elementwise_affine=False)
        self.k_norm = nn.LayerNorm(hidden // heads, elementwise_affine=False)
        self.proj = nn.Linear(hidden, hidden)

    def forward(self, x, cos, sin):
        N, D = x.shape
        q, k, v = self.qkv(x).view(N, 3, self.heads, D // self.heads).permute(1, 2, 0, 3)
        q = rotate(self.q_norm(q), cos, sin)
        k = rotate(self.k_norm(k), cos, sin)
        out = F.scaled_dot_product_attention(q, k, v)
        return self.proj(out.transpose(0, 1).reshape(N, D))


class CrossAttention(nn.Module):
    def __init__(self, hidden: int, heads: int):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(hidden, hidden)
        self.kv = nn.Linear(hidden, 2 * hidden)
        self.proj = nn.Linear(hidden, hidden)

    def forward(self, x, ctx):
        N, D = x.shape
        L = ctx.shape[0]
        hd = D // self.heads
        q = self.q(x).view(N, self.heads, hd).transpose(0, 1)
        k, v = self.kv(ctx).view(L, 2, self.heads, hd).permute(1, 2, 0, 3)
        out = F.scaled_dot_product_attention(q, k, v)
        return self.proj(out.transpose(0, 1).reshape(N, D))


class DiTBlock(nn.Module):
    def __init__(self, hidden: int, heads: int, mlp_ratio: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(hidden, elementwise_affine=False)
        self.attn = SelfAttention(hidden, heads)
        self.norm_x = nn.LayerNorm(hidden)
        self.cross = CrossAttention(hidden, heads)
        self.norm2 = nn.LayerNorm(hidden, elementwise_affine=False)
        self.mlp = nn.Sequential(
            nn.Linear(hidden, mlp_ratio * hidden), nn.GELU(approximate="tanh"), nn.Linear(mlp_ratio * hidden, hidden)
        )
        self.ada = nn.Sequential(nn.SiLU(), nn.Linear(hidden, 6 * hidden))

    def forward(self, x, c, cos, sin, ctx=None):
        shift1, scale1, gate1, shift2, scale2, gate2 = self.ada(c).chunk(6, dim=-1)
        x = x + gate1 * self.attn(modulate(self.norm1(x), shift1, scale1), cos, sin)
        if ctx is not None:
            x = x + self.cross(self.norm_x(x), ctx)
        return x + gate2 * self.mlp(modulate(self.norm2(x), shift2, scale2))


class Denoiser(nn.Module):
    """Velocity predictor ``G(x_t, t, refs, prompt)`` for a single sample."""

    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        self.cfg = cfg
        D = cfg.hidden
        self.patch_in = nn.Linear(cfg.channels, D)
        self.time_mlp = nn.Sequential(nn.Linear(cfg.time_freq_dim, D), nn.SiLU(), nn.Linear(D, D))
        self.text_embed = nn.Embedding(cfg.vocab_size, D)
        self.text_pos = nn.Parameter(torch.zeros(MAX_PROMPT_LEN, D))
        nn.init.normal_(self.text_pos, std=0.02)
        self.blocks = nn.ModuleList(DiTBlock(D, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.layers))
        self.norm_out = nn.LayerNorm(D, elementwise_affine=False)
        self.ada_out = nn.Sequential(nn.SiLU(), nn.Linear(D, 2 * D))
        self.patch_out = nn.Linear(D, cfg.channels)
        # untrained model predicts zero velocity
        nn.init.zeros_(self.patch_out.weight)
        nn.init.zeros_(self.patch_out.bias)

        self.freqs = rope_frequencies(cfg.head_dim)
        self._rope_cache: dict = {}

    @property
    def scheme(self) -> LayoutScheme:
        return LayoutScheme(self.cfg.scheme)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def layout_for(self, grid: LatentGrid, refs: ReferenceShape) -> TokenLayout:
        return cached_layout(self.scheme, grid, refs, self.cfg.delta)

    def _rope(self, grid: LatentGrid, refs: ReferenceShape):
        key = (grid, refs)
        if key not in self._rope_cache:
            layout = self.layout_for(grid, refs)
            angles = torch.from_numpy(self.freqs.angles(layout.positions)).float()
            self._rope_cache[key] = (torch.cos(angles), torch.sin(angles))
        return self._rope_cache[key]

    def forward(
        self,
        xt: torch.Tensor,
        t: float,
        refs: torch.Tensor | None = None,
        views_per_subject: tuple[int, ...] = (),
        prompt_ids: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """
        xt: (T, C, H, W) noisy video latent
        t: scalar timestep in [0, 1]
        refs: (V, C, H, W) clean reference latents in layout order, or None
        prompt_ids: (L,) token ids, or None for the text-free branch
        """
        T, C, H, W = xt.shape
        if C != self.cfg.channels:
            raise ValueError(f"latent has {C} channels, model expects {self.cfg.channels}")
        grid = LatentGrid(T, H, W, C)
        tokens = xt.permute(0, 2, 3, 1).reshape(T * H * W, C)
        n_video = tokens.shape[0]

        if refs is not None and len(refs):
            if tuple(refs.shape[1:]) != (C, H, W):
                raise ValueError(f"reference latents {tuple(refs.shape[1:])} do not match video {(C, H, W)}")
            if sum(views_per_subject) != refs.shape[0]:
                raise ValueError("views_per_subject does not account for every reference view")
            tokens = torch.cat([tokens, refs.permute(0, 2, 3, 1).reshape(-1, C)])
            ref_shape = ReferenceShape(views_per_subject)
        else:
            ref_shape = ReferenceShape(())

        x = self.patch_in(tokens)
        # references are clean: they get the t = 0 embedding
        steps = torch.tensor([t * self.cfg.total_steps, 0.0])
        emb = self.time_mlp(timestep_embedding(steps, self.cfg.time_freq_dim))
        c = torch.cat([emb[:1].expand(n_video, -1), emb[1:].expand(x.shape[0] - n_video, -1)])

        ctx = None
        if prompt_ids is not None:
            ids = prompt_ids[:MAX_PROMPT_LEN]
            ctx = self.text_embed(ids) + self.text_pos[: len(ids)]

        cos, sin = self._rope(grid, ref_shape)
        for block in self.blocks:
            x = block(x, c, cos, sin, ctx)

        x = x[:n_video]
        shift, scale = self.ada_out(c[:n_video]).chunk(2, dim=-1)
        out = self.patch_out(modulate(self.norm_out(x), shift, scale))
        return out.view(T, H, W, C).permute(0, 3, 1, 2)


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.float()
    return torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32))


def denoise(
    model: Denoiser,
    xt,
    t: float,
    refs: ReferenceSet | None = None,
    prompt: Prompt | None = None,
) -> torch.Tensor:
    """Predict the velocity for one sample; ``refs``/``prompt`` may be absent."""
    xt = _as_tensor(xt)
    ref_tensor, views = None, ()
    if refs is not None and refs.subjects:
        ref_tensor = _as_tensor(refs.stacked())
        views = refs.shape.views_per_subject
    ids = None if prompt is None else torch.tensor(prompt.ids, dtype=torch.long)
    return model(xt, t, ref_tensor, views, ids)


# ---------------------------------------------------------------------------
# checkpoints: one .npz holding a JSON config echo plus named parameter arrays


def save_checkpoint(path: str | Path, model: Denoiser, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"format": "mvs2v-checkpoint/1", "config": asdict(model.cfg), "extra": extra or {}}
    arrays = {f"param/{k}": v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    return path


def load_checkpoint(path: str | Path) -> tuple[Denoiser, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["__meta__"]))
        state = {k[len("param/"):]: torch.from_numpy(data[k]) for k in data.files if k.startswith("param/")}
    model = Denoiser(DenoiserConfig.from_dict(meta["config"]))
    model.load_state_dict(state)
    model.eval()
    return model, meta


def scheduler_for(cfg: DenoiserConfig) -> SchedulerConfig:
    return SchedulerConfig(total_steps=cfg.total_steps)
