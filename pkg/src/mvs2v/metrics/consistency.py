"""Bidirectional multi-view and 3D subject-consistency metrics.

For generated views (N) and reference views (M):

* embedding similarity, v->r: mean over generated views of the best
  similarity to any reference; r->v: mean over references of the best
  similarity to any generated view;
* pairwise view score (lower is better), same two directions with ``min``;
* point-cloud nearest-neighbor distance from the generated cloud to the
  reference cloud and back.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .backends import BackendError, EmbeddingBackend, MetricBackends, PairScoreBackend, PointCloudBackend

METRIC_COLUMNS = (
    "s_dino_v2r", "s_dino_r2v",
    "s_clip_v2r", "s_clip_r2v",
    "s_met3r_v2r", "s_met3r_r2v",
    "d_nn_v2r", "d_nn_r2v",
)
HIGHER_IS_BETTER = {c: c.startswith("s_") and "met3r" not in c for c in METRIC_COLUMNS}


class Role(str, enum.Enum):
    REFERENCE = "reference"
    GENERATED = "generated"


class Direction(str, enum.Enum):
    V2R = "v2r"
    R2V = "r2v"

    @classmethod
    def parse(cls, value) -> "Direction":
        return value if isinstance(value, cls) else cls(str(value).lower().replace("->", "2"))


@dataclass
class ViewSet:
    images: list[np.ndarray]
    role: Role = Role.GENERATED

    def __post_init__(self):
        self.images = [np.asarray(im, dtype=np.float64) for im in self.images]
        if not self.images:
            raise ValueError(f"{self.role.value} view set is empty")
        channels = {im.shape[-1] for im in self.images}
        if any(im.ndim != 3 for im in self.images) or len(channels) != 1:
            raise ValueError("views must be H x W x C images with a common channel count")

    def __len__(self) -> int:
        return len(self.images)


def _embed_all(views: ViewSet, backend: EmbeddingBackend) -> np.ndarray:
    out = []
    for i, im in enumerate(views.images):
        try:
            out.append(np.asarray(backend.embed(im), dtype=np.float64))
        except Exception as exc:
            raise BackendError(f"{getattr(backend, 'name', backend)} failed on {views.role.value} image {i}: {exc}") from exc
    return np.stack(out)


def exact_mean(values) -> float:
    """Correctly rounded mean; independent of element order."""
    values = np.asarray(values, dtype=np.float64).ravel()
    return math.fsum(values) / len(values)


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dot products of unit rows, clipped to [-1, 1]; identical rows give exactly 1.

    Written as an explicit product-and-sum so that ``cosine_matrix(b, a)`` is
    bitwise the transpose of ``cosine_matrix(a, b)``.
    """
    sim = np.clip((a[:, None, :] * b[None, :, :]).sum(-1), -1.0, 1.0)
    same = (a[:, None, :] == b[None, :, :]).all(-1)
    sim[same] = 1.0
    return sim


def similarity_matrix(gen: ViewSet, ref: ViewSet, backend: EmbeddingBackend) -> np.ndarray:
    """``N x M`` cosine similarities between generated and reference views."""
    return cosine_matrix(_embed_all(gen, backend), _embed_all(ref, backend))


def directional_similarity(matrix: np.ndarray, direction) -> float:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise ValueError(f"need a nonempty N x M matrix, got shape {matrix.shape}")
    if Direction.parse(direction) is Direction.V2R:
        return exact_mean(matrix.max(axis=1))
    return exact_mean(matrix.max(axis=0))


def pair_score_matrix(gen: ViewSet, ref: ViewSet, backend: PairScoreBackend) -> np.ndarray:
    out = np.empty((len(gen), len(ref)))
    for n, g in enumerate(gen.images):
        for m, r in enumerate(ref.images):
            try:
                out[n, m] = backend.score(g, r)
            except Exception as exc:
                raise BackendError(
                    f"{getattr(backend, 'name', backend)} failed on generated image {n} / reference image {m}: {exc}"
                ) from exc
    return out


def directional_min(matrix: np.ndarray, direction) -> float:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or 0 in matrix.shape:
        raise ValueError(f"need a nonempty N x M matrix, got shape {matrix.shape}")
    if Direction.parse(direction) is Direction.V2R:
        return exact_mean(matrix.min(axis=1))
    return exact_mean(matrix.min(axis=0))


def directional_pair_score(gen: ViewSet, ref: ViewSet, backend: PairScoreBackend, direction) -> float:
    return directional_min(pair_score_matrix(gen, ref, backend), direction)


def _check_cloud(points, name: str) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError(f"{name} point cloud is empty or not an (n, d) array")
    return points


def nn_distance(source, target) -> float:
    """Mean Euclidean distance from each source point to its nearest target point."""
    source = _check_cloud(source, "source")
    target = _check_cloud(target, "target")
    if source.shape[1] != target.shape[1]:
        raise ValueError("point clouds differ in dimension")
    return exact_mean(kernels.nn_distances(source, target))


def cloud_scale(*clouds: np.ndarray) -> float:
    """Bounding-box diagonal of the union of the clouds (1.0 when degenerate)."""
    pts = np.concatenate([np.asarray(c, dtype=np.float64) for c in clouds])
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return diag if diag > 0 else 1.0


@dataclass
class ConsistencyReport:
    values: dict[str, float]
    matrices: dict[str, np.ndarray] = field(default_factory=dict)
    nn_per_point: dict[str, np.ndarray] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def recompute(self) -> dict[str, float]:
        """Rebuild the directional values from the stored matrices."""
        out = {}
        for name in ("dino", "clip"):
            if name in self.matrices:
                out[f"s_{name}_v2r"] = directional_similarity(self.matrices[name], "v2r")
                out[f"s_{name}_r2v"] = directional_similarity(self.matrices[name], "r2v")
        if "met3r" in self.matrices:
            out["s_met3r_v2r"] = directional_min(self.matrices["met3r"], "v2r")
            out["s_met3r_r2v"] = directional_min(self.matrices["met3r"], "r2v")
        for key in ("d_nn_v2r", "d_nn_r2v"):
            if key in self.nn_per_point:
                out[key] = exact_mean(self.nn_per_point[key])
        return out

    def row(self) -> list[float]:
        return [self.values.get(c, math.nan) for c in METRIC_COLUMNS]


def evaluate(gen: ViewSet, ref: ViewSet, backends: MetricBackends | None = None) -> ConsistencyReport:
    """All eight directional values; a failing backend blanks only its own metrics."""
    backends = backends or MetricBackends.toy()
    report = ConsistencyReport(values={c: math.nan for c in METRIC_COLUMNS})

    for name in ("dino", "clip"):
        try:
            mat = similarity_matrix(gen, ref, getattr(backends, name))
        except Exception as exc:
            report.errors[name] = str(exc)
            continue
        report.matrices[name] = mat
        report.values[f"s_{name}_v2r"] = directional_similarity(mat, "v2r")
        report.values[f"s_{name}_r2v"] = directional_similarity(mat, "r2v")

    try:
        mat = pair_score_matrix(gen, ref, backends.met3r)
        report.matrices["met3r"] = mat
        report.values["s_met3r_v2r"] = directional_min(mat, "v2r")
        report.values["s_met3r_r2v"] = directional_min(mat, "r2v")
    except Exception as exc:
        report.errors["met3r"] = str(exc)

    try:
        p_gen = _check_cloud(backends.cloud.reconstruct(gen.images), "generated")
        p_ref = _check_cloud(backends.cloud.reconstruct(ref.images), "reference")
        scale = cloud_scale(p_gen, p_ref)
        p_gen, p_ref = p_gen / scale, p_ref / scale
        report.nn_per_point["d_nn_v2r"] = kernels.nn_distances(p_gen, p_ref)
        report.nn_per_point["d_nn_r2v"] = kernels.nn_distances(p_ref, p_gen)
        report.values["d_nn_v2r"] = exact_mean(report.nn_per_point["d_nn_v2r"])
        report.values["d_nn_r2v"] = exact_mean(report.nn_per_point["d_nn_r2v"])
    except Exception as exc:
        report.errors["nn"] = str(exc)

    return report


def evaluate_views(generated: Sequence[np.ndarray], references: Sequence[np.ndarray], backends=None) -> ConsistencyReport:
    return evaluate(ViewSet(list(generated), Role.GENERATED), ViewSet(list(references), Role.REFERENCE), backends)
