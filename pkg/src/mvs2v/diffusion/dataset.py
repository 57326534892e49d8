"""Turn curation output into training samples for the toy denoiser."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..curation.clients import AssetSpec, StageClients
from ..curation.pipeline import CurationConfig, CurationRecord, curate, default_specs, read_manifest
from .data import LatentVideo, Prompt, ReferenceSet, Sample, encode_frames


def encode_video(frames: np.ndarray, temporal_stride: int = 4, spatial_pool: int = 2) -> np.ndarray:
    """Toy video VAE: average-pool space, subsample time, map to latents.

    ``(L, R, R, 3)`` pixels -> ``(L // temporal_stride, 3, R // pool, R // pool)``.
    """
    frames = np.asarray(frames, dtype=np.float32)[::temporal_stride]
    L, R1, R2, C = frames.shape
    p = spatial_pool
    pooled = frames[:, : R1 // p * p, : R2 // p * p].reshape(L, R1 // p, p, R2 // p, p, C).mean(axis=(2, 4))
    return encode_frames(pooled)


def record_to_sample(
    record: CurationRecord,
    video: np.ndarray,
    crops: Sequence[np.ndarray],
    temporal_stride: int = 4,
    spatial_pool: int = 2,
) -> Sample:
    start, end = record.clip
    latent = encode_video(video[start:end], temporal_stride, spatial_pool)
    refs = ReferenceSet([[encode_frames(c) for c in crops]])
    return Sample(LatentVideo(latent), refs, Prompt.from_text(record.caption), record.record_id)


def samples_from_manifest(
    manifest_path: str | Path, temporal_stride: int = 4, spatial_pool: int = 2, trainable_only: bool = True
) -> list[Sample]:
    root = Path(manifest_path).parent
    manifest = read_manifest(manifest_path)
    records = manifest.training_view() if trainable_only else manifest.records
    out = []
    for rec in records:
        video = np.load(root / rec.raw_video)
        crops = [np.load(root / ref["path"]) for subj in rec.subjects for ref in subj["references"]]
        out.append(record_to_sample(rec, video, crops, temporal_stride, spatial_pool))
    return out


def toy_samples(
    n: int = 8,
    seed: int = 0,
    temporal_stride: int = 8,
    config: CurationConfig | None = None,
    specs: Sequence[AssetSpec] | None = None,
) -> list[Sample]:
    """In-memory toy training set built by the mock curation pipeline.

    With the default config (16-frame clips, 16 px frames) and stride 8 the
    latents are ``2 x 3 x 8 x 8`` with up to four 8 x 8 reference views.
    """
    config = config or CurationConfig(seed=seed)
    specs = list(specs) if specs is not None else default_specs(n)
    samples = []
    for rec, art in curate(specs, StageClients.mocks(config.resolution), config):
        if not rec.trainable:
            continue
        samples.append(record_to_sample(rec, art.video, list(art.crops.values()), temporal_stride))
    return samples[:n]
