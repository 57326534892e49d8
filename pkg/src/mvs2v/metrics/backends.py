"""Feature, pair-score and point-cloud backends for the consistency metrics.

Real extractors (DINO, CLIP, MEt3R, pi^3) plug in through the same protocols;
only deterministic toy backends ship here.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from . import kernels


class BackendError(RuntimeError):
    """A backend failed on a specific input image."""


@runtime_checkable
class EmbeddingBackend(Protocol):
    name: str

    def embed(self, image: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class PairScoreBackend(Protocol):
    name: str

    def score(self, a: np.ndarray, b: np.ndarray) -> float: ...


@runtime_checkable
class PointCloudBackend(Protocol):
    name: str

    def reconstruct(self, images: Sequence[np.ndarray]) -> np.ndarray: ...


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        out = np.zeros_like(v)
        out[0] = 1.0
        return out
    return v / norm


@dataclass(frozen=True)
class HistogramEmbedding:
    """Per-channel intensity histogram, L2-normalized."""

    bins: int = 8
    name: str = "hist"

    def embed(self, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3:
            raise ValueError(f"expected an H x W x C image, got shape {image.shape}")
        return _unit(kernels.channel_histogram(image, self.bins))


@dataclass(frozen=True)
class GridPoolEmbedding:
    """Mean color over a coarse ``grid x grid`` layout, L2-normalized.

    Sensitive to spatial arrangement, unlike the histogram.
    """

    grid: int = 4
    name: str = "grid"

    def embed(self, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3:
            raise ValueError(f"expected an H x W x C image, got shape {image.shape}")
        H, W, _ = image.shape
        rows = np.array_split(np.arange(H), self.grid)
        cols = np.array_split(np.arange(W), self.grid)
        cells = [image[np.ix_(r, c)].mean(axis=(0, 1)) for r in rows for c in cols]
        return _unit(np.concatenate(cells))


@dataclass(frozen=True)
class ToyPairScore:
    """``1 - cos`` of a toy embedding, clamped to [0, 1]; exactly 0 for equal images."""

    embedding: EmbeddingBackend = HistogramEmbedding()
    name: str = "toy-pair"

    def score(self, a: np.ndarray, b: np.ndarray) -> float:
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape == b.shape and np.array_equal(a, b):
            return 0.0
        cos = float(self.embedding.embed(a) @ self.embedding.embed(b))
        return min(max(1.0 - cos, 0.0), 1.0)


@dataclass(frozen=True)
class ToyPointCloud:
    """One 3D point per pixel: (row, col) on the unit square plus luminance as depth.

    Every view lands in the same canonical frame, so identical view sets give
    identical clouds and a subset of views gives a subset of points.
    """

    name: str = "toy-cloud"

    def reconstruct(self, images: Sequence[np.ndarray]) -> np.ndarray:
        clouds = []
        for img in images:
            img = np.asarray(img, dtype=np.float64)
            H, W = img.shape[:2]
            rr, cc = np.meshgrid(np.linspace(0, 1, H), np.linspace(0, 1, W), indexing="ij")
            depth = img.mean(axis=-1)
            clouds.append(np.stack([rr.ravel(), cc.ravel(), depth.ravel()], axis=1))
        if not clouds:
            raise ValueError("cannot reconstruct a point cloud from zero views")
        return np.concatenate(clouds)


class _ExternalModel:
    model_name = ""

    def __init__(self, **options):
        self.options = options
        self.name = self.model_name

    def _unavailable(self, *args, **kwargs):
        raise NotImplementedError(f"{self.model_name} weights are not bundled; supply an adapter implementation")


class DinoEmbedding(_ExternalModel):
    model_name = "dino"
    embed = _ExternalModel._unavailable


class ClipEmbedding(_ExternalModel):
    model_name = "clip"
    embed = _ExternalModel._unavailable


class Met3rScore(_ExternalModel):
    model_name = "met3r"
    score = _ExternalModel._unavailable


class Pi3PointCloud(_ExternalModel):
    model_name = "pi3"
    reconstruct = _ExternalModel._unavailable


@dataclass
class MetricBackends:
    """The four slots the report is built from."""

    dino: EmbeddingBackend
    clip: EmbeddingBackend
    met3r: PairScoreBackend
    cloud: PointCloudBackend

    @classmethod
    def toy(cls) -> "MetricBackends":
        return cls(dino=HistogramEmbedding(), clip=GridPoolEmbedding(), met3r=ToyPairScore(), cloud=ToyPointCloud())
