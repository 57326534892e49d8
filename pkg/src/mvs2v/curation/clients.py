"""External-model client interfaces for the curation stages.

Each stage talks to one client. The ``Mock*`` classes are small procedural
renderers and analysers: pure functions of their inputs and seed, so the
whole pipeline is reproducible without any model weights. The adapter stubs
name the production models and exist so configs can refer to them; they do
not ship an implementation.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from importlib import resources
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
from scipy import ndimage

SCENE_TYPES = ("OC", "HOI")
FOCUS_MODIFIERS = {"OC": "the most salient", "HOI": "the handheld"}

COLOR_RGB = {
    "red": (0.85, 0.15, 0.15),
    "green": (0.2, 0.7, 0.25),
    "blue": (0.15, 0.3, 0.85),
    "yellow": (0.9, 0.85, 0.2),
    "purple": (0.55, 0.2, 0.7),
    "orange": (0.95, 0.55, 0.1),
    "white": (0.95, 0.95, 0.95),
    "black": (0.08, 0.08, 0.08),
    "gray": (0.5, 0.5, 0.5),
}
SKIN = np.array([0.88, 0.7, 0.58])


def load_system_prompt(name: str) -> str:
    return resources.files("mvs2v.curation").joinpath("prompts", f"{name}.txt").read_text()


def stable_seed(*parts) -> int:
    digest = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class AssetSpec:
    asset_id: str
    category: str
    color: str = "red"
    scene: str = "OC"
    distractors: int = 0
    watermark: bool = False

    def __post_init__(self):
        if self.scene not in SCENE_TYPES:
            raise ValueError(f"scene must be one of {SCENE_TYPES}, got {self.scene!r}")
        if self.color not in COLOR_RGB:
            raise ValueError(f"unknown color {self.color!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "AssetSpec":
        return cls(**d)


@dataclass
class SceneImage:
    image: np.ndarray  # (R, R, 3) in [0, 1]
    description: str
    markers: tuple[str, ...] = ()


@dataclass
class RawVideo:
    frames: np.ndarray  # (L, R, R, 3) in [0, 1]
    motion_prompt: str
    markers: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class Detection:
    mask: np.ndarray  # (R, R) bool
    score: float


@dataclass
class Verdict:
    accept: bool
    reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"accept": self.accept, "reasons": list(self.reasons)}


@runtime_checkable
class S2IClient(Protocol):
    def compose(self, spec: AssetSpec, seed: int) -> SceneImage: ...


@runtime_checkable
class I2VClient(Protocol):
    def synthesize(self, scene: SceneImage, spec: AssetSpec, num_frames: int, seed: int) -> RawVideo: ...


@runtime_checkable
class CaptionClient(Protocol):
    def caption(self, video: RawVideo, spec: AssetSpec) -> tuple[str, str]: ...


@runtime_checkable
class SegmentClient(Protocol):
    def segment(self, frame: np.ndarray, prompt: str) -> list[Detection]: ...


@runtime_checkable
class FilterClient(Protocol):
    def judge(self, video: RawVideo, caption: str) -> Verdict: ...


# ---------------------------------------------------------------------------
# deterministic mocks


def _texture(spec: AssetSpec, seed: int, facets: int = 4, facet_px: int = 4, height: int = 8) -> np.ndarray:
    """Wrap-around strip of ``facets`` colored faces; the object's full 360 degree look."""
    rng = np.random.default_rng(stable_seed("texture", spec.asset_id, spec.color, seed))
    base = np.array(COLOR_RGB[spec.color])
    faces = np.clip(base + rng.uniform(-0.35, 0.35, size=(facets, 3)), 0.02, 0.98)
    strip = np.repeat(faces, facet_px, axis=0)  # (facets * facet_px, 3)
    shade = np.linspace(0.85, 1.0, height)[:, None, None]
    return np.clip(strip[None, :, :] * shade, 0.0, 1.0)


@dataclass
class MockS2IClient:
    resolution: int = 16
    system_prompt: str = field(default_factory=lambda: load_system_prompt("compose"))

    def compose(self, spec: AssetSpec, seed: int) -> SceneImage:
        R = self.resolution
        rng = np.random.default_rng(stable_seed("compose", spec.asset_id, seed))
        bg = rng.uniform(0.3, 0.6, size=3)
        image = np.broadcast_to(bg, (R, R, 3)).copy()
        tex = _texture(spec, seed)
        h, w = tex.shape[0], R // 2
        top, left = (R - h) // 2, (R - w) // 2
        image[top:top + h, left:left + w] = tex[:, :w]
        if spec.scene == "HOI":
            image[2:R - 2, : max(1, left - 1)] = SKIN
        description = f"a {spec.color} {spec.category} " + (
            "on a table" if spec.scene == "OC" else "held by a person"
        )
        return SceneImage(image=image, description=description)


@dataclass
class MockI2VClient:
    system_prompt: str = field(default_factory=lambda: load_system_prompt("synthesize"))

    def synthesize(self, scene: SceneImage, spec: AssetSpec, num_frames: int, seed: int) -> RawVideo:
        R = scene.image.shape[0]
        rng = np.random.default_rng(stable_seed("synthesize", spec.asset_id, seed))
        bg = scene.image[0, R - 1].copy()
        tex = _texture(spec, seed)
        h, strip_w = tex.shape[0], tex.shape[1]
        w = R // 2
        top, left = (R - h) // 2, (R - w) // 2
        turns = 1.0 if spec.scene == "OC" else 0.75
        phase = rng.integers(strip_w)
        frames = np.empty((num_frames, R, R, 3))
        for f in range(num_frames):
            frame = np.broadcast_to(bg, (R, R, 3)).copy()
            if spec.scene == "HOI":
                frame[2:R - 2, : max(1, left - 1)] = SKIN
            offset = (phase + int(round(f * turns * strip_w / max(num_frames, 1)))) % strip_w
            visible = np.roll(tex, -offset, axis=1)[:, :w]
            # handheld objects bob by one pixel
            dy = int(f % 4 == 3) if spec.scene == "HOI" else 0
            frame[top + dy:top + dy + h, left:left + w] = visible
            for k in range(spec.distractors):
                r0 = 1 if k % 2 == 0 else R - 3
                c0 = R - 3 - 3 * (k // 2)
                frame[r0:r0 + 2, c0:c0 + 2] = tex[0, 4 * k % strip_w]
            if spec.watermark:
                frame[R - 1, R - 5:R - 1] = 1.0
            frames[f] = frame
        markers = scene.markers + (("watermark",) if spec.watermark else ())
        prompt = "camera orbits the object" if spec.scene == "OC" else "the person slowly rotates the object"
        return RawVideo(frames=frames, motion_prompt=prompt, markers=markers)


@dataclass
class MockCaptionClient:
    system_prompt: str = field(default_factory=lambda: load_system_prompt("caption"))

    def caption(self, video: RawVideo, spec: AssetSpec) -> tuple[str, str]:
        if spec.scene == "OC":
            text = f"a {spec.color} {spec.category} on a table while the camera orbits around the object"
        else:
            text = f"a person holds a {spec.color} {spec.category} in hand and rotates it slowly showing the sides"
        return text, spec.category


@dataclass
class MockSegmentClient:
    """Connected components of non-background, non-skin pixels.

    A bare category prompt returns every instance (ambiguous when distractors
    are present); a prompt carrying a focus modifier returns only the largest.
    """

    threshold: float = 0.08
    system_prompt: str = field(default_factory=lambda: load_system_prompt("segment"))

    def segment(self, frame: np.ndarray, prompt: str) -> list[Detection]:
        border = np.concatenate([frame[0], frame[-1], frame[:, -1]])
        bg = np.median(border, axis=0)
        fg = np.abs(frame - bg).max(axis=-1) > self.threshold
        fg &= np.abs(frame - SKIN).max(axis=-1) > self.threshold
        labels, n = ndimage.label(fg)
        if n == 0:
            return []
        sizes = ndimage.sum(fg, labels, index=np.arange(1, n + 1))
        order = np.argsort(-sizes, kind="stable")
        dets = [Detection(mask=labels == (i + 1), score=float(sizes[i] / fg.size)) for i in order]
        focused = any(prompt.startswith(m + " ") for m in FOCUS_MODIFIERS.values())
        return dets[:1] if focused else dets


@dataclass
class EmptySegmentClient:
    """Segmenter that never detects anything."""

    def segment(self, frame: np.ndarray, prompt: str) -> list[Detection]:
        return []


@dataclass
class FullFrameSegmentClient:
    """Segmenter whose single mask covers the whole frame."""

    def segment(self, frame: np.ndarray, prompt: str) -> list[Detection]:
        return [Detection(mask=np.ones(frame.shape[:2], dtype=bool), score=1.0)]


@dataclass
class MockFilterClient:
    """Rejects videos flagged with distracting overlays or empty frames."""

    reject_markers: Sequence[str] = ("watermark", "subtitle")
    system_prompt: str = field(default_factory=lambda: load_system_prompt("filter"))

    def judge(self, video: RawVideo, caption: str) -> Verdict:
        reasons = [f"distracting element: {m}" for m in video.markers if m in self.reject_markers]
        if float(np.ptp(video.frames)) < 1e-3:
            reasons.append("static empty video")
        return Verdict(accept=not reasons, reasons=reasons)


# ---------------------------------------------------------------------------
# production adapters: interface only


class _AdapterStub:
    model_name = ""

    def __init__(self, **options):
        self.options = options

    def _unavailable(self, *args, **kwargs):
        raise NotImplementedError(
            f"{type(self).__name__} wraps the external model {self.model_name!r}; "
            "provide an adapter implementation or use the mock client"
        )


class NanoBananaS2I(_AdapterStub):
    model_name = "Nano-Banana"
    compose = _AdapterStub._unavailable


class Uni3CI2V(_AdapterStub):
    model_name = "Uni3C"
    synthesize = _AdapterStub._unavailable


class Wan22I2V(_AdapterStub):
    model_name = "Wan2.2"
    synthesize = _AdapterStub._unavailable


class Tarsier2Caption(_AdapterStub):
    model_name = "Tarsier2"
    caption = _AdapterStub._unavailable


class GroundedSAMSegment(_AdapterStub):
    model_name = "Grounded-SAM"
    segment = _AdapterStub._unavailable


class GeminiFilter(_AdapterStub):
    model_name = "Gemini-2.5"
    judge = _AdapterStub._unavailable


CLIENT_REGISTRY = {
    "s2i": {"mock": MockS2IClient, "nano-banana": NanoBananaS2I},
    "i2v": {"mock": MockI2VClient, "uni3c": Uni3CI2V, "wan2.2": Wan22I2V},
    "caption": {"mock": MockCaptionClient, "tarsier2": Tarsier2Caption},
    "segment": {"mock": MockSegmentClient, "grounded-sam": GroundedSAMSegment, "empty": EmptySegmentClient,
                "full-frame": FullFrameSegmentClient},
    "filter": {"mock": MockFilterClient, "gemini": GeminiFilter},
}


@dataclass
class StageClients:
    s2i: S2IClient
    i2v: I2VClient
    caption: CaptionClient
    segment: SegmentClient
    filter: FilterClient

    @classmethod
    def mocks(cls, resolution: int = 16) -> "StageClients":
        return cls(
            s2i=MockS2IClient(resolution=resolution),
            i2v=MockI2VClient(),
            caption=MockCaptionClient(),
            segment=MockSegmentClient(),
            filter=MockFilterClient(),
        )

    @classmethod
    def from_names(cls, names: dict[str, str], resolution: int = 16) -> "StageClients":
        built = {}
        for stage, table in CLIENT_REGISTRY.items():
            name = str(names.get(stage, "mock")).lower()
            if name not in table:
                raise KeyError(f"unknown {stage} client {name!r}; known: {sorted(table)}")
            factory = table[name]
            built[stage] = factory(resolution=resolution) if factory is MockS2IClient else factory()
        return cls(**built)
