"""Conditioning data: video latents, multi-view references and prompts."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..layout import LatentGrid, ReferenceShape

# Fixed toy vocabulary standing in for a real text encoder's tokenizer.
VOCAB: tuple[str, ...] = (
    "<pad>", "<unk>",
    "a", "the", "on", "in", "of", "with", "and", "while", "around", "from",
    "camera", "orbits", "rotates", "slowly", "holds", "person", "hand", "handheld",
    "table", "floor", "shelf", "studio", "room", "outdoor", "background",
    "red", "green", "blue", "yellow", "purple", "orange", "white", "black", "gray",
    "book", "figurine", "mug", "vase", "shoe", "toy", "bottle", "lamp", "box", "plant",
    "most", "salient", "small", "large", "wooden", "plastic", "ceramic", "metal",
    "video", "view", "object", "scene", "turning", "showing", "sides",
)
VOCAB_INDEX = {word: i for i, word in enumerate(VOCAB)}
UNK_ID = VOCAB_INDEX["<unk>"]


@dataclass(frozen=True)
class Prompt:
    ids: tuple[int, ...]

    def __post_init__(self):
        bad = [i for i in self.ids if not 0 <= i < len(VOCAB)]
        if bad:
            raise ValueError(f"token ids out of vocabulary range [0, {len(VOCAB)}): {bad}")
        if not self.ids:
            raise ValueError("a prompt needs at least one token")

    @classmethod
    def from_text(cls, text: str) -> "Prompt":
        words = re.findall(r"[a-z<>]+", text.lower()) or ["<unk>"]
        return cls(tuple(VOCAB_INDEX.get(w, UNK_ID) for w in words))

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class LatentVideo:
    data: np.ndarray  # (T, C, H, W)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 4:
            raise ValueError(f"latent video must be T x C x H x W, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("latent video contains non-finite values")

    @property
    def grid(self) -> LatentGrid:
        T, C, H, W = self.data.shape
        return LatentGrid(T, H, W, C)


@dataclass
class ReferenceSet:
    """Per-subject ordered reference latents, each ``C x H x W``."""

    subjects: list[list[np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        self.subjects = [[np.asarray(v, dtype=np.float32) for v in views] for views in self.subjects]
        for i, views in enumerate(self.subjects):
            if not views:
                raise ValueError(f"subject {i} has no reference views")
            for v in views:
                if v.ndim != 3:
                    raise ValueError(f"reference view must be C x H x W, got {v.shape}")

    @property
    def shape(self) -> ReferenceShape:
        return ReferenceShape([len(views) for views in self.subjects])

    def check_matches(self, grid: LatentGrid) -> None:
        want = (grid.channels, grid.height, grid.width)
        for i, views in enumerate(self.subjects):
            for m, v in enumerate(views):
                if v.shape != want:
                    raise ValueError(f"reference s{i}:v{m} has shape {v.shape}, video expects {want}")

    def stacked(self) -> np.ndarray:
        """All views in layout order, ``(sum M_i, C, H, W)``."""
        views = [v for subject in self.subjects for v in subject]
        if not views:
            return np.zeros((0,), dtype=np.float32)
        return np.stack(views)

    def first_views(self, n: int) -> "ReferenceSet":
        return ReferenceSet([views[:n] for views in self.subjects])


# toy VAE: pixels in [0, 1] (H, W, C) <-> latents in [-1, 1] (C, H, W)


def encode_frames(frames: np.ndarray) -> np.ndarray:
    """``(..., H, W, C)`` pixel frames to ``(..., C, H, W)`` latents."""
    frames = np.asarray(frames, dtype=np.float32)
    return np.moveaxis(frames * 2.0 - 1.0, -1, -3)


def decode_frames(latents: np.ndarray) -> np.ndarray:
    latents = np.asarray(latents, dtype=np.float32)
    return np.clip(np.moveaxis((latents + 1.0) / 2.0, -3, -1), 0.0, 1.0)


@dataclass
class Sample:
    video: LatentVideo
    refs: ReferenceSet
    prompt: Prompt
    sample_id: str = ""


def make_batch(samples: Sequence[Sample]) -> list[Sample]:
    grids = {s.video.grid for s in samples}
    if len(grids) != 1:
        raise ValueError(f"batch mixes latent grids: {sorted(map(str, grids))}")
    return list(samples)
