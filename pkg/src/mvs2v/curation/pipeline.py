"""Synthetic (video, references, text) curation.

Stages run in a fixed order per asset spec::

    compose -> synthesize -> caption -> extract -> filter

Records are independent and may be processed by a bounded worker pool; the
manifest writer is the only serialization point. Filtered-out and unusable
records are kept in the manifest for audit; :func:`training_view` selects
the ones fit for training.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .augment import AugmentationParams, AugmentationRanges, apply_augmentation
from .clients import FOCUS_MODIFIERS, SCENE_TYPES, AssetSpec, RawVideo, SegmentClient, StageClients, stable_seed

log = logging.getLogger(__name__)

STAGES = ("compose", "synthesize", "caption", "extract", "filter")


class PipelineConfigError(ValueError):
    """Invalid pipeline-level configuration; aborts the whole run."""


@dataclass(frozen=True)
class CurationConfig:
    seed: int = 0
    raw_length: int = 24
    clip_length: int = 16
    keyframes: int = 4
    resolution: int = 16
    crop_size: int = 8
    workers: int = 1
    ranges: AugmentationRanges = AugmentationRanges()
    clients: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.clip_length >= self.raw_length:
            raise PipelineConfigError(
                f"clip_length ({self.clip_length}) must be shorter than raw_length ({self.raw_length})"
            )
        if self.clip_length < 1 or self.keyframes < 1 or self.crop_size < 1 or self.workers < 1:
            raise PipelineConfigError("clip_length, keyframes, crop_size and workers must all be >= 1")
        if self.ranges.scale[0] <= 0 or self.ranges.scale[0] > self.ranges.scale[1]:
            raise PipelineConfigError(f"bad scale range {self.ranges.scale}")

    @classmethod
    def from_dict(cls, d: dict) -> "CurationConfig":
        d = dict(d)
        ranges = AugmentationRanges.from_dict(d.pop("ranges", d.pop("augmentation", {})) or {})
        known = set(cls.__dataclass_fields__) - {"ranges"}
        unknown = set(d) - known - {"specs"}
        if unknown:
            raise PipelineConfigError(f"unknown curation config keys: {sorted(unknown)}")
        return cls(ranges=ranges, **{k: v for k, v in d.items() if k in known})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ranges"] = asdict(self.ranges)
        return out


def augment_prompt(category: str, scene: str) -> str:
    """Grounding prompt with the focus modifier for the scene type."""
    category = category.strip()
    if not category:
        raise ValueError("category description must be nonempty")
    if scene not in SCENE_TYPES:
        raise ValueError(f"scene must be one of {SCENE_TYPES}, got {scene!r}")
    return f"{FOCUS_MODIFIERS[scene]} {category}"


def clip_training_segment(
    raw_length: int, clip_length: int, num_keyframes: int, rng: np.random.Generator
) -> tuple[tuple[int, int], list[int]]:
    """Pick a training clip ``[start, end)`` and keyframes over the raw video.

    Keyframes are stratified over the full raw video. If every keyframe falls
    inside the clip, one of them is redrawn from the frames outside it, so at
    least one reference view is always decoupled from the training clip.
    """
    if clip_length >= raw_length:
        raise ValueError(f"clip length {clip_length} must be < raw video length {raw_length}")
    if num_keyframes < 1:
        raise ValueError("need at least one keyframe")
    if clip_length < 1:
        raise ValueError("clip length must be >= 1")
    start = int(rng.integers(0, raw_length - clip_length + 1))
    end = start + clip_length

    edges = np.linspace(0, raw_length, num_keyframes + 1)
    keys = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        lo_i, hi_i = int(np.floor(lo)), max(int(np.ceil(hi)), int(np.floor(lo)) + 1)
        keys.append(int(rng.integers(lo_i, min(hi_i, raw_length))))
    if all(start <= k < end for k in keys):
        outside = np.concatenate([np.arange(0, start), np.arange(end, raw_length)])
        keys[int(rng.integers(len(keys)))] = int(rng.choice(outside))
    return (start, end), sorted(keys)


def resize(image: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of an ``(H, W, C)`` image to ``size x size``."""
    H, W = image.shape[:2]
    rows = np.linspace(0, H - 1, size)
    cols = np.linspace(0, W - 1, size)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack(
        [ndimage.map_coordinates(image[..., ch], [rr, cc], order=1, mode="nearest") for ch in range(image.shape[2])],
        axis=-1,
    )


def crop_detection(frame: np.ndarray, mask: np.ndarray, size: int, fill: float = 1.0) -> np.ndarray:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    region = np.where(mask[..., None], frame, fill)[r0:r1, c0:c1]
    return resize(region, size)


@dataclass
class ReferenceCrop:
    keyframe: int
    image: np.ndarray  # (crop, crop, 3)
    augmentation: AugmentationParams


@dataclass
class ExtractionResult:
    crops: list[ReferenceCrop]
    failures: list[dict]

    @property
    def usable(self) -> bool:
        return bool(self.crops)


def extract_references(
    frames: np.ndarray,
    keyframes: Sequence[int],
    segmenter: SegmentClient,
    prompt: str,
    crop_size: int,
    ranges: AugmentationRanges,
    rng: np.random.Generator,
) -> ExtractionResult:
    """Segment the subject in each keyframe, crop it and augment the crop.

    A keyframe is usable only when the segmenter returns exactly one
    detection; other outcomes are recorded as failures.
    """
    crops, failures = [], []
    for k in keyframes:
        if not 0 <= k < len(frames):
            raise IndexError(f"keyframe {k} outside video of length {len(frames)}")
        params = AugmentationParams.sample(ranges, crop_size, rng)
        dets = segmenter.segment(frames[k], prompt)
        if len(dets) != 1:
            failures.append({"keyframe": int(k), "reason": f"{len(dets)} detections"})
            continue
        crop = crop_detection(frames[k], dets[0].mask, crop_size)
        crops.append(ReferenceCrop(int(k), apply_augmentation(crop, params), params))
    return ExtractionResult(crops, failures)


# ---------------------------------------------------------------------------
# records and manifest


def _sha(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


@dataclass
class CurationRecord:
    record_id: str
    asset_id: str
    scene: str
    seed: int
    raw_video: str | None = None
    raw_length: int = 0
    clip: tuple[int, int] | None = None
    keyframes: list[int] = field(default_factory=list)
    caption: str = ""
    subject_word: str = ""
    grounding_prompt: str = ""
    subjects: list[dict] = field(default_factory=list)
    extraction_failures: list[dict] = field(default_factory=list)
    usable: bool = False
    verdict: dict = field(default_factory=lambda: {"accept": False, "reasons": ["not filtered"]})
    provenance: list[dict] = field(default_factory=list)
    error: str | None = None

    @property
    def trainable(self) -> bool:
        return self.usable and bool(self.verdict.get("accept")) and self.error is None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["clip"] = list(self.clip) if self.clip is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CurationRecord":
        d = dict(d)
        if d.get("clip") is not None:
            d["clip"] = tuple(d["clip"])
        return cls(**d)


@dataclass
class RecordArtifacts:
    """In-memory arrays produced alongside a record (written by the manifest writer)."""

    video: np.ndarray | None = None
    crops: dict[str, np.ndarray] = field(default_factory=dict)


def process_spec(
    index: int, spec: AssetSpec, clients: StageClients, config: CurationConfig
) -> tuple[CurationRecord, RecordArtifacts]:
    seed = stable_seed(config.seed, index, spec.asset_id)
    rng = np.random.default_rng(seed)
    rid = f"{index:05d}-{spec.asset_id}"
    rec = CurationRecord(record_id=rid, asset_id=spec.asset_id, scene=spec.scene, seed=seed)
    art = RecordArtifacts()
    stage = STAGES[0]
    try:
        scene = clients.s2i.compose(spec, seed)
        rec.provenance.append(_prov(stage, clients.s2i, [f"spec:{spec.asset_id}"], ["scene_image"]))

        stage = "synthesize"
        video: RawVideo = clients.i2v.synthesize(scene, spec, config.raw_length, seed)
        rec.raw_video = f"videos/{rid}.npy"
        rec.raw_length = len(video)
        art.video = np.asarray(video.frames, dtype=np.float32)
        rec.provenance.append(_prov(stage, clients.i2v, ["scene_image"], [rec.raw_video], sha=_sha(art.video)))

        stage = "caption"
        rec.caption, rec.subject_word = clients.caption.caption(video, spec)
        rec.provenance.append(_prov(stage, clients.caption, [rec.raw_video], ["caption", "subject_word"]))

        stage = "extract"
        clip, keys = clip_training_segment(rec.raw_length, config.clip_length, config.keyframes, rng)
        rec.clip, rec.keyframes = clip, keys
        rec.grounding_prompt = augment_prompt(rec.subject_word, spec.scene)
        result = extract_references(
            art.video, keys, clients.segment, rec.grounding_prompt, config.crop_size, config.ranges, rng
        )
        refs = []
        for crop in result.crops:
            path = f"crops/{rid}_k{crop.keyframe:03d}.npy"
            arr = crop.image.astype(np.float32)
            art.crops[path] = arr
            refs.append({
                "keyframe": crop.keyframe,
                "path": path,
                "sha256": _sha(arr),
                "augmentation": crop.augmentation.to_dict(),
            })
        rec.subjects = [{"word": rec.subject_word, "references": refs}]
        rec.extraction_failures = result.failures
        rec.usable = result.usable
        rec.provenance.append(
            _prov(stage, clients.segment, [rec.raw_video, f"keyframes:{keys}", rec.grounding_prompt],
                  [r["path"] for r in refs])
        )

        stage = "filter"
        verdict = clients.filter.judge(video, rec.caption)
        rec.verdict = verdict.to_dict()
        if not rec.usable:
            rec.verdict["reasons"] = rec.verdict["reasons"] + ["no usable reference crops"]
        rec.provenance.append(_prov(stage, clients.filter, [rec.raw_video, "caption"], ["verdict"]))
    except Exception as exc:  # per-record isolation
        log.warning("record %s failed at stage %s: %s", rid, stage, exc)
        rec.error = f"{stage}: {type(exc).__name__}: {exc}"
        rec.usable = False
        rec.verdict = {"accept": False, "reasons": [f"pipeline error at {stage}"]}
    return rec, art


def _prov(stage: str, client, inputs: list, outputs: list, **extra) -> dict:
    return {"stage": stage, "client": type(client).__name__, "inputs": inputs, "outputs": outputs, **extra}


@dataclass
class Manifest:
    records: list[CurationRecord]
    config: dict = field(default_factory=dict)

    def training_view(self) -> list[CurationRecord]:
        return [r for r in self.records if r.trainable]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.records)

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()


def training_view(manifest: Manifest) -> list[CurationRecord]:
    return manifest.training_view()


def curate(
    specs: Iterable[AssetSpec | dict], clients: StageClients, config: CurationConfig
) -> list[tuple[CurationRecord, RecordArtifacts]]:
    """Run every stage for every spec; returns records with their in-memory arrays."""
    config.validate()
    specs = [s if isinstance(s, AssetSpec) else AssetSpec.from_dict(s) for s in specs]
    ids = [s.asset_id for s in specs]
    if len(set(ids)) != len(ids):
        raise PipelineConfigError("asset ids must be unique")

    def work(item):
        i, spec = item
        return process_spec(i, spec, clients, config)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(work, enumerate(specs)))
    else:
        results = [work(item) for item in enumerate(specs)]
    return results


def run_pipeline(
    specs: Iterable[AssetSpec | dict],
    clients: StageClients,
    config: CurationConfig,
    out_dir: str | Path | None = None,
) -> Manifest:
    results = curate(specs, clients, config)
    manifest = Manifest([rec for rec, _ in results], config=config.to_dict())
    if out_dir is not None:
        write_manifest(manifest, [art for _, art in results], out_dir)
    return manifest


def write_manifest(manifest: Manifest, artifacts: Sequence[RecordArtifacts], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    for rec, art in zip(manifest.records, artifacts):
        if art.video is not None and rec.raw_video:
            _save(out / rec.raw_video, art.video)
        for rel, arr in art.crops.items():
            _save(out / rel, arr)
    path = out / "manifest.jsonl"
    path.write_text(manifest.to_jsonl())
    (out / "manifest.sha256").write_text(manifest.digest() + "\n")
    return path


def _save(path: Path, arr: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.save(fh, arr)


def read_manifest(path: str | Path) -> Manifest:
    lines = Path(path).read_text().splitlines()
    return Manifest([CurationRecord.from_dict(json.loads(line)) for line in lines if line.strip()])


def load_specs(items: Sequence[dict]) -> list[AssetSpec]:
    return [AssetSpec.from_dict(d) for d in items]


def default_specs(n: int, scene: str | None = None, watermark_every: int = 0) -> list[AssetSpec]:
    """A deterministic roster of toy assets."""
    categories = ["book", "figurine", "mug", "vase", "shoe", "toy", "bottle", "lamp", "box", "plant"]
    colors = ["red", "green", "blue", "yellow", "purple", "orange", "white", "black"]
    specs = []
    for i in range(n):
        specs.append(AssetSpec(
            asset_id=f"asset{i:03d}",
            category=categories[i % len(categories)],
            color=colors[(i * 3) % len(colors)],
            scene=scene or SCENE_TYPES[i % 2],
            watermark=bool(watermark_every) and (i % watermark_every == watermark_every - 1),
        ))
    return specs
