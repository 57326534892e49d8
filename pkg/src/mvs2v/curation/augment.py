"""Reference-crop augmentation: scale, rotation, shift and brightness."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class AugmentationRanges:
    scale: tuple[float, float] = (0.8, 1.2)
    rotation_deg: tuple[float, float] = (-15.0, 15.0)
    shift_frac: float = 0.1
    brightness: float = 0.1

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentationRanges":
        return cls(
            scale=tuple(d.get("scale", cls.scale)),
            rotation_deg=tuple(d.get("rotation_deg", cls.rotation_deg)),
            shift_frac=float(d.get("shift_frac", cls.shift_frac)),
            brightness=float(d.get("brightness", cls.brightness)),
        )


@dataclass(frozen=True)
class AugmentationParams:
    scale: float = 1.0
    rotation_deg: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    brightness: float = 0.0

    @classmethod
    def sample(cls, ranges: AugmentationRanges, crop_size: int, rng: np.random.Generator) -> "AugmentationParams":
        max_shift = ranges.shift_frac * crop_size
        return cls(
            scale=float(rng.uniform(*ranges.scale)),
            rotation_deg=float(rng.uniform(*ranges.rotation_deg)),
            dx=float(rng.uniform(-max_shift, max_shift)),
            dy=float(rng.uniform(-max_shift, max_shift)),
            brightness=float(rng.uniform(-ranges.brightness, ranges.brightness)),
        )

    def within(self, ranges: AugmentationRanges, crop_size: int) -> bool:
        max_shift = ranges.shift_frac * crop_size
        return (
            ranges.scale[0] <= self.scale <= ranges.scale[1]
            and ranges.rotation_deg[0] <= self.rotation_deg <= ranges.rotation_deg[1]
            and abs(self.dx) <= max_shift
            and abs(self.dy) <= max_shift
            and abs(self.brightness) <= ranges.brightness
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def matrix(self, size: tuple[int, int]) -> np.ndarray:
        """Homogeneous 3x3 map from source (row, col) to augmented (row, col)."""
        cy, cx = (size[0] - 1) / 2.0, (size[1] - 1) / 2.0
        th = math.radians(self.rotation_deg)
        c, s = math.cos(th), math.sin(th)
        to_origin = np.array([[1, 0, -cy], [0, 1, -cx], [0, 0, 1]], dtype=np.float64)
        rot_scale = np.array([[self.scale * c, -self.scale * s, 0], [self.scale * s, self.scale * c, 0], [0, 0, 1]])
        back = np.array([[1, 0, cy + self.dy], [0, 1, cx + self.dx], [0, 0, 1]], dtype=np.float64)
        return back @ rot_scale @ to_origin

    def inverse_matrix(self, size: tuple[int, int]) -> np.ndarray:
        return np.linalg.inv(self.matrix(size))


def apply_augmentation(image: np.ndarray, params: AugmentationParams, fill: float = 1.0) -> np.ndarray:
    """Warp an ``(H, W, C)`` image in [0, 1] and shift its brightness."""
    image = np.asarray(image, dtype=np.float64)
    inv = params.inverse_matrix(image.shape[:2])
    out = np.empty_like(image)
    for ch in range(image.shape[2]):
        # affine_transform pulls: output[o] = input[inv @ o]
        out[..., ch] = ndimage.affine_transform(
            image[..., ch], inv[:2, :2], offset=inv[:2, 2], order=1, mode="constant", cval=fill
        )
    return np.clip(out + params.brightness, 0.0, 1.0)
