"""Token position layouts for video + multi-view reference sequences.

The video latent (T x H x W tokens) and every reference view (H x W tokens
each) are merged into one token list. Each token receives a 3D rotary
position (t, h, w). The three layout schemes differ only in where the
reference tokens land:

* ``VANILLA`` - reference views appended frame by frame after the video.
* ``SS``      - one frame per subject, views tiled along the width axis.
* ``TS``      - a temporal gap ``delta`` separates the video from the first
  subject and each subject block from the next; views of one subject sit
  in adjacent frames.

Token order is always: video tokens (t-major, then h, then w), then subjects
in input order, views in input order.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from ._accel import USE_NUMBA, njit

DEFAULT_DELTA = 16
ROPE_BASE = 10000.0

VIDEO = -1


class LayoutScheme(str, enum.Enum):
    VANILLA = "vanilla"
    SS = "ss"
    TS = "ts"

    @classmethod
    def parse(cls, value: "str | LayoutScheme") -> "LayoutScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-rope", "").replace("_rope", ""))
        except ValueError:
            raise ValueError(f"unknown layout scheme {value!r}; expected one of vanilla, ss, ts") from None


@dataclass(frozen=True)
class LatentGrid:
    temporal_len: int
    height: int
    width: int
    channels: int = 1

    def __post_init__(self):
        for name in ("temporal_len", "height", "width", "channels"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def frame_tokens(self) -> int:
        return self.height * self.width

    @property
    def video_tokens(self) -> int:
        return self.temporal_len * self.height * self.width


@dataclass(frozen=True)
class ReferenceShape:
    views_per_subject: tuple[int, ...] = ()

    def __init__(self, views_per_subject: Sequence[int] = ()):
        views = tuple(int(m) for m in views_per_subject)
        if any(m < 1 for m in views):
            raise ValueError(f"every subject needs at least one view, got {list(views)}")
        object.__setattr__(self, "views_per_subject", views)

    @property
    def num_subjects(self) -> int:
        return len(self.views_per_subject)

    @property
    def total_views(self) -> int:
        return sum(self.views_per_subject)


@dataclass(frozen=True)
class TokenLayout:
    """Per-token positions and segment labels.

    ``subject`` and ``view`` are ``-1`` for video tokens.
    """

    positions: np.ndarray  # (N, 3) int64, columns t, h, w
    subject: np.ndarray  # (N,) int64
    view: np.ndarray  # (N,) int64
    num_video_tokens: int

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def is_video(self) -> np.ndarray:
        return self.subject == VIDEO

    @property
    def segments(self) -> list[str]:
        return [segment_label(s, v) for s, v in zip(self.subject.tolist(), self.view.tolist())]

    def to_text(self) -> str:
        lines = [
            f"{t} {h} {w} {segment_label(s, v)}"
            for (t, h, w), s, v in zip(self.positions.tolist(), self.subject.tolist(), self.view.tolist())
        ]
        return "\n".join(lines) + "\n"


def segment_label(subject: int, view: int) -> str:
    if subject == VIDEO:
        return "video"
    return f"ref:s{subject}:v{view}"


def _frame_grid(height: int, width: int, w_offset: int = 0) -> np.ndarray:
    hh, ww = np.meshgrid(np.arange(height), np.arange(width) + w_offset, indexing="ij")
    return np.stack([hh.ravel(), ww.ravel()], axis=1)


def _assemble(grid: LatentGrid, refs: ReferenceShape, placements) -> TokenLayout:
    """``placements`` yields (subject, view, t, w_offset) per reference view."""
    hw = _frame_grid(grid.height, grid.width)
    n_frame = grid.frame_tokens

    t_video = np.repeat(np.arange(grid.temporal_len), n_frame)
    blocks = [np.column_stack([t_video, np.tile(hw, (grid.temporal_len, 1))])]
    subj = [np.full(grid.video_tokens, VIDEO)]
    view = [np.full(grid.video_tokens, VIDEO)]

    for s, m, t, w_off in placements:
        spatial = hw if w_off == 0 else _frame_grid(grid.height, grid.width, w_off)
        blocks.append(np.column_stack([np.full(n_frame, t), spatial]))
        subj.append(np.full(n_frame, s))
        view.append(np.full(n_frame, m))

    return TokenLayout(
        positions=np.concatenate(blocks).astype(np.int64),
        subject=np.concatenate(subj).astype(np.int64),
        view=np.concatenate(view).astype(np.int64),
        num_video_tokens=grid.video_tokens,
    )


def build_vanilla_layout(grid: LatentGrid, refs: ReferenceShape) -> TokenLayout:
    def placements():
        t = grid.temporal_len
        for s, n_views in enumerate(refs.views_per_subject):
            for m in range(n_views):
                yield s, m, t, 0
                t += 1

    return _assemble(grid, refs, placements())


def build_ss_layout(grid: LatentGrid, refs: ReferenceShape) -> TokenLayout:
    def placements():
        for s, n_views in enumerate(refs.views_per_subject):
            for m in range(n_views):
                yield s, m, grid.temporal_len + s, m * grid.width

    return _assemble(grid, refs, placements())


def build_ts_layout(grid: LatentGrid, refs: ReferenceShape, delta: int = DEFAULT_DELTA) -> TokenLayout:
    if int(delta) != delta or delta < 1:
        raise ValueError(f"temporal shift delta must be an integer >= 1, got {delta!r}")

    def placements():
        last = grid.temporal_len - 1
        for s, n_views in enumerate(refs.views_per_subject):
            start = last + delta
            for m in range(n_views):
                yield s, m, start + m, 0
            last = start + n_views - 1

    return _assemble(grid, refs, placements())


def build_layout(
    scheme: "LayoutScheme | str",
    grid: LatentGrid,
    refs: ReferenceShape,
    delta: int = DEFAULT_DELTA,
) -> TokenLayout:
    scheme = LayoutScheme.parse(scheme)
    if scheme is LayoutScheme.VANILLA:
        return build_vanilla_layout(grid, refs)
    if scheme is LayoutScheme.SS:
        return build_ss_layout(grid, refs)
    return build_ts_layout(grid, refs, delta)


@lru_cache(maxsize=256)
def cached_layout(scheme: LayoutScheme, grid: LatentGrid, refs: ReferenceShape, delta: int) -> TokenLayout:
    return build_layout(scheme, grid, refs, delta)


# ---------------------------------------------------------------------------
# rotary encoding


@dataclass(frozen=True)
class FrequencyTable:
    axis_split: tuple[int, int, int]
    per_axis: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False)

    @property
    def head_dim(self) -> int:
        return sum(self.axis_split)

    def angles(self, positions: np.ndarray) -> np.ndarray:
        """(N, 3) positions -> (N, head_dim // 2) rotation angles."""
        positions = np.asarray(positions, dtype=np.float64)
        return np.concatenate(
            [positions[:, axis, None] * freqs[None, :] for axis, freqs in enumerate(self.per_axis)],
            axis=1,
        )


def default_axis_split(head_dim: int) -> tuple[int, int, int]:
    """Near-equal even thirds; the temporal axis absorbs the remainder."""
    if head_dim < 2 or head_dim % 2:
        raise ValueError(f"head_dim must be a positive even integer, got {head_dim}")
    spatial = (head_dim // 3) // 2 * 2
    return head_dim - 2 * spatial, spatial, spatial


def rope_frequencies(head_dim: int, axis_split: Sequence[int] | None = None, base: float = ROPE_BASE) -> FrequencyTable:
    if axis_split is None:
        axis_split = default_axis_split(head_dim)
    axis_split = tuple(int(d) for d in axis_split)
    if len(axis_split) != 3:
        raise ValueError("axis_split must have three entries (t, h, w)")
    if any(d < 0 or d % 2 for d in axis_split):
        raise ValueError(f"every axis share must be even, got {axis_split}")
    if sum(axis_split) != head_dim:
        raise ValueError(f"axis_split {axis_split} does not sum to head_dim {head_dim}")
    per_axis = tuple(base ** (-np.arange(0, d, 2, dtype=np.float64) / d) if d else np.zeros(0) for d in axis_split)
    return FrequencyTable(axis_split, per_axis)


def apply_rope(vectors: np.ndarray, layout: "TokenLayout | np.ndarray", freqs: FrequencyTable) -> np.ndarray:
    """Rotate each token's head vector by its position.

    ``vectors`` has shape ``(..., N, head_dim)``; adjacent channels
    ``(2k, 2k+1)`` form one rotation plane. ``layout`` may be a
    :class:`TokenLayout` or a raw ``(N, 3)`` position array.
    """
    positions = layout.positions if isinstance(layout, TokenLayout) else np.asarray(layout)
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape[-1] != freqs.head_dim:
        raise ValueError(f"vector dim {vectors.shape[-1]} does not match frequency table head_dim {freqs.head_dim}")
    if vectors.shape[-2] != len(positions):
        raise ValueError(f"{vectors.shape[-2]} vectors for {len(positions)} positions")
    angles = freqs.angles(positions)
    rotate = rotate_pairs_numba if USE_NUMBA else rotate_pairs_numpy
    return rotate(vectors, np.cos(angles), np.sin(angles))


def rotate_pairs_numpy(vectors: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    even, odd = vectors[..., 0::2], vectors[..., 1::2]
    out = np.empty_like(vectors)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


@njit
def _rotate_pairs_numba(vectors, cos, sin):
    out = np.empty_like(vectors)
    B, N, D = vectors.shape
    for b in range(B):
        for n in range(N):
            for k in range(D // 2):
                x = vectors[b, n, 2 * k]
                y = vectors[b, n, 2 * k + 1]
                c = cos[n, k]
                s = sin[n, k]
                out[b, n, 2 * k] = x * c - y * s
                out[b, n, 2 * k + 1] = x * s + y * c
    return out


def rotate_pairs_numba(vectors: np.ndarray, cos: np.ndarray, sin: np.ndarray) -> np.ndarray:
    flat = np.ascontiguousarray(np.asarray(vectors, dtype=np.float64).reshape(-1, *vectors.shape[-2:]))
    return _rotate_pairs_numba(flat, cos, sin).reshape(vectors.shape)
