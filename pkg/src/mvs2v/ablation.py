"""Layout-scheme and reference-view-count ablations on the toy benchmark.

Both sweeps produce tables with one row per variant and the eight
consistency metrics as columns. The scheme sweep trains (or loads) one toy
checkpoint per layout scheme; the view sweep reuses the TS checkpoint and
keeps the first 1..4 views of every benchmark subject, in input order.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .diffusion.data import Sample, decode_frames
from .diffusion.dataset import toy_samples
from .diffusion.model import Denoiser, DenoiserConfig, load_checkpoint, save_checkpoint
from .diffusion.training import TrainConfig, train
from .layout import DEFAULT_DELTA, LayoutScheme
from .metrics.backends import MetricBackends
from .metrics.consistency import METRIC_COLUMNS, evaluate_views
from .sampler import GuidanceConfig, sample

log = logging.getLogger(__name__)

SCHEMES = (LayoutScheme.VANILLA, LayoutScheme.SS, LayoutScheme.TS)
SCHEME_ROW = {LayoutScheme.VANILLA: "Vanilla", LayoutScheme.SS: "SS-RoPE", LayoutScheme.TS: "TS-RoPE"}
VIEW_COUNTS = (1, 2, 3, 4)


class MissingCheckpointError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class AblationConfig:
    seed: int = 0
    train_steps: int = 500
    train_samples: int = 8
    benchmark_samples: int = 4
    sample_steps: int = 10
    omega_ref: float = 2.5
    omega_text: float = 7.5
    delta: int = DEFAULT_DELTA
    inline_train: bool = True
    checkpoint_dir: str | None = None
    layers: int = 3
    heads: int = 2
    head_dim: int = 32

    @classmethod
    def from_dict(cls, d: dict) -> "AblationConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def get_model(scheme: LayoutScheme, cfg: AblationConfig, train_set: list[Sample]) -> Denoiser:
    path = Path(cfg.checkpoint_dir) / f"{scheme.value}.npz" if cfg.checkpoint_dir else None
    if path is not None and path.exists():
        model, _ = load_checkpoint(path)
        return model
    if not cfg.inline_train:
        raise MissingCheckpointError(f"no checkpoint for scheme {scheme.value} at {path} and inline training is off")
    model_cfg = DenoiserConfig(
        scheme=scheme.value, delta=cfg.delta, layers=cfg.layers, heads=cfg.heads, head_dim=cfg.head_dim
    )
    model, losses = train(train_set, model_cfg, TrainConfig(steps=cfg.train_steps, seed=cfg.seed, log_every=0))
    log.info("trained %s: loss %.4f -> %.4f", scheme.value, losses[0], losses[-1])
    if path is not None:
        save_checkpoint(path, model, {"losses": losses})
    return model


def benchmark_row(model: Denoiser, benchmark: list[Sample], views: int | None, cfg: AblationConfig) -> dict:
    guidance = GuidanceConfig(cfg.omega_ref, cfg.omega_text, cfg.sample_steps, cfg.seed)
    backends = MetricBackends.toy()
    per_metric = {c: [] for c in METRIC_COLUMNS}
    for fixture in benchmark:
        refs = fixture.refs if views is None else fixture.refs.first_views(views)
        video = sample(model, refs, fixture.prompt, fixture.video.grid, guidance)
        generated = list(decode_frames(video.data))
        references = [decode_frames(v) for v in fixture.refs.subjects[0][: views or None]]
        report = evaluate_views(generated, references, backends)
        for c in METRIC_COLUMNS:
            per_metric[c].append(report.values[c])
    return {c: math.fsum(v) / len(v) for c, v in per_metric.items()}


def run_ablation(cfg: AblationConfig, out_dir: str | Path | None = None) -> dict[str, list[dict]]:
    """Return ``{"schemes": [3 rows], "views": [4 rows]}``; write CSVs when ``out_dir`` is given."""
    train_set = toy_samples(cfg.train_samples, seed=cfg.seed)
    benchmark = [s for s in train_set if s.refs.shape.views_per_subject[0] >= max(VIEW_COUNTS)][: cfg.benchmark_samples]
    if not benchmark:
        raise RuntimeError("toy benchmark has no subject with four reference views")

    models = {scheme: get_model(scheme, cfg, train_set) for scheme in SCHEMES}
    scheme_rows = [
        {"variant": SCHEME_ROW[s], **benchmark_row(models[s], benchmark, None, cfg)} for s in SCHEMES
    ]
    view_rows = [
        {"variant": str(n), **benchmark_row(models[LayoutScheme.TS], benchmark, n, cfg)} for n in VIEW_COUNTS
    ]
    tables = {"schemes": scheme_rows, "views": view_rows}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, rows in tables.items():
            write_variant_table(rows, out / f"ablation_{name}.csv")
    return tables


def write_variant_table(rows: list[dict], path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("variant",) + METRIC_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def config_dict(cfg: AblationConfig) -> dict:
    return asdict(cfg)
