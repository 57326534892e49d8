"""Command-line entry point: ``mvs2v <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config, write_snapshot

log = logging.getLogger("mvs2v")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_views(text: str | None) -> list[int]:
    if text is None or text.strip() == "":
        return []
    try:
        views = [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"--views expects comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in views):
        raise UsageError(f"every subject needs >= 1 view, got {views}")
    return views


def _merge(cfg: dict, args: argparse.Namespace, mapping: dict[str, str]) -> dict:
    """Command-line flags override config-file keys."""
    cfg = dict(cfg)
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_layout_inspect(args) -> int:
    from .layout import LatentGrid, ReferenceShape, build_layout

    try:
        grid = LatentGrid(args.T, args.H, args.W)
        refs = ReferenceShape(parse_views(args.views))
        layout = build_layout(args.scheme, grid, refs, args.delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = layout.to_text()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "layout.txt").write_text(text)
        write_snapshot(out, {"command": "layout-inspect", "scheme": args.scheme, "T": args.T, "H": args.H,
                             "W": args.W, "views": args.views, "delta": args.delta, "seed": args.seed})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    from dataclasses import asdict

    from .diffusion.dataset import samples_from_manifest, toy_samples
    from .diffusion.model import DenoiserConfig, save_checkpoint
    from .diffusion.training import TrainConfig, evaluation_loss, train

    cfg = load_config(args.config)
    cfg = _merge(cfg, args, {"seed": "seed", "steps": "steps", "scheme": "scheme", "delta": "delta", "lr": "lr"})
    cfg.setdefault("seed", 0)
    model_cfg = DenoiserConfig.from_dict(cfg)
    train_cfg = TrainConfig.from_dict(cfg)
    if cfg.get("manifest"):
        samples = samples_from_manifest(cfg["manifest"], temporal_stride=int(cfg.get("temporal_stride", 8)))
    else:
        samples = toy_samples(int(cfg.get("samples", 8)), seed=train_cfg.seed)
    if not samples:
        raise RuntimeError("no trainable samples")

    out = Path(args.out)
    write_snapshot(out, {"command": "train", **cfg, "model": asdict(model_cfg), "train": asdict(train_cfg)})
    model, losses = train(samples, model_cfg, train_cfg)
    save_checkpoint(out / "checkpoint.npz", model, {"seed": train_cfg.seed, "steps": train_cfg.steps})
    summary = {
        "seed": train_cfg.seed,
        "parameters": model.num_parameters(),
        "losses": losses,
        "eval_loss": evaluation_loss(model, samples),
    }
    (out / "train_log.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(f"trained {train_cfg.steps} steps: loss {losses[0]:.4f} -> {losses[-1]:.4f}; checkpoint {out / 'checkpoint.npz'}")
    return EXIT_OK


def frames_to_images(latent: np.ndarray) -> list[np.ndarray]:
    """Linear min-max map of the whole latent to 8-bit frames."""
    lo, hi = float(latent.min()), float(latent.max())
    scaled = (latent - lo) / (hi - lo) if hi > lo else np.zeros_like(latent)
    frames = []
    for frame in scaled:  # (C, H, W)
        img = np.moveaxis(frame, 0, -1)
        img = img if img.shape[-1] == 3 else img.mean(axis=-1)
        frames.append(np.round(img * 255).astype(np.uint8))
    return frames


def cmd_sample(args) -> int:
    from PIL import Image

    from .diffusion.dataset import toy_samples
    from .diffusion.data import Prompt
    from .diffusion.model import load_checkpoint
    from .sampler import GuidanceConfig, sample

    cfg = load_config(args.config)
    cfg = _merge(cfg, args, {"seed": "seed", "steps": "steps", "omega_ref": "omega_ref", "omega_text": "omega_text",
                             "checkpoint": "checkpoint", "fixture": "fixture", "prompt": "prompt"})
    if not cfg.get("checkpoint"):
        raise UsageError("sample needs --checkpoint (or 'checkpoint' in the config)")
    seed = int(cfg.get("seed", 0))
    model, meta = load_checkpoint(cfg["checkpoint"])
    fixtures = toy_samples(int(cfg.get("fixture", 0)) + 1, seed=int(cfg.get("data_seed", 0)))
    fixture = fixtures[int(cfg.get("fixture", 0))]
    refs = fixture.refs
    if args.views:
        refs = refs.first_views(parse_views(args.views)[0])
    prompt = Prompt.from_text(cfg["prompt"]) if cfg.get("prompt") else fixture.prompt
    guidance = GuidanceConfig(
        omega_ref=float(cfg.get("omega_ref", 2.5)),
        omega_text=float(cfg.get("omega_text", 7.5)),
        steps=int(cfg.get("steps", 50)),
        seed=seed,
    )
    video = sample(model, refs, prompt, fixture.video.grid, guidance)

    out = Path(args.out)
    write_snapshot(out, {"command": "sample", **cfg, "seed": seed, "guidance": guidance.__dict__,
                         "views_per_subject": list(refs.shape.views_per_subject)})
    np.save(out / "latent.npy", video.data)
    frame_dir = out / "frames"
    frame_dir.mkdir(exist_ok=True)
    for i, img in enumerate(frames_to_images(video.data)):
        Image.fromarray(img).save(frame_dir / f"frame_{i:03d}.png")
    print(f"sampled latent {video.data.shape} with seed {seed} -> {out / 'latent.npy'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .metrics.evaluation import evaluate_manifest, write_table

    cfg = load_config(args.config)
    cfg = _merge(cfg, args, {"manifest": "manifest", "seed": "seed"})
    if not cfg.get("manifest"):
        raise UsageError("eval needs --manifest (or 'manifest' in the config)")
    rows = evaluate_manifest(cfg["manifest"])
    out = Path(args.out)
    write_snapshot(out, {"command": "eval", **cfg, "seed": cfg.get("seed", 0)})
    path = write_table(rows, out / "metrics.csv")
    failures = {r["sample_id"]: r["errors"] for r in rows if r["errors"]}
    if failures:
        (out / "backend_errors.json").write_text(json.dumps(failures, indent=1) + "\n")
    print(f"evaluated {len(rows)} samples -> {path}")
    return EXIT_OK


def cmd_curate(args) -> int:
    from .curation.clients import StageClients
    from .curation.pipeline import CurationConfig, default_specs, load_specs, run_pipeline

    cfg = load_config(args.config)
    cfg = _merge(cfg, args, {"seed": "seed", "workers": "workers"})
    specs_cfg = cfg.pop("specs", None)
    count = cfg.pop("count", None) or args.count
    config = CurationConfig.from_dict(cfg)
    specs = load_specs(specs_cfg) if specs_cfg else default_specs(count, watermark_every=5)
    clients = StageClients.from_names(config.clients, resolution=config.resolution)
    out = Path(args.out)
    write_snapshot(out, {"command": "curate", **config.to_dict(), "specs": [s.__dict__ for s in specs]})
    manifest = run_pipeline(specs, clients, config, out_dir=out)
    kept = len(manifest.training_view())
    print(f"curated {len(manifest.records)} records ({kept} trainable), digest {manifest.digest()}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import render_table, report

    table = args.table
    if table is None:
        raise UsageError("report needs --table")
    blocks = report(table, args.out)
    write_snapshot(args.out, {"command": "report", "table": str(table), "seed": args.seed})
    sys.stdout.write(render_table(blocks))
    return EXIT_OK


def cmd_ablation(args) -> int:
    from .ablation import AblationConfig, config_dict, run_ablation

    cfg = load_config(args.config)
    cfg = _merge(cfg, args, {"seed": "seed", "steps": "train_steps", "delta": "delta", "omega_ref": "omega_ref",
                             "omega_text": "omega_text", "checkpoint_dir": "checkpoint_dir",
                             "sample_steps": "sample_steps"})
    if args.no_inline_train:
        cfg["inline_train"] = False
    ab = AblationConfig.from_dict(cfg)
    write_snapshot(args.out, {"command": "ablation", **config_dict(ab)})
    tables = run_ablation(ab, args.out)
    print(f"wrote {len(tables['schemes'])} scheme rows and {len(tables['views'])} view-count rows to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvs2v", description="Multi-view subject-to-video diffusion lab.")
    parser.add_argument("--version", action="version", version=f"mvs2v {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, out_required=True):
        p.add_argument("--config", help="YAML/JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("layout-inspect", help="dump token positions of a layout")
    common(p, out_required=False)
    p.add_argument("--scheme", choices=["vanilla", "ss", "ts"], default="ts")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--H", type=int, default=1)
    p.add_argument("--W", type=int, default=1)
    p.add_argument("--views", default="", help="views per subject, e.g. 2,1")
    p.add_argument("--delta", type=int, default=16)
    p.set_defaults(func=cmd_layout_inspect)

    p = sub.add_parser("train", help="train the toy denoiser")
    common(p)
    p.add_argument("--scheme", choices=["vanilla", "ss", "ts"])
    p.add_argument("--delta", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="sample a latent video with dual guidance")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--steps", type=int)
    p.add_argument("--omega-ref", dest="omega_ref", type=float)
    p.add_argument("--omega-text", dest="omega_text", type=float)
    p.add_argument("--views", help="number of reference views to keep per subject")
    p.add_argument("--fixture", type=int, help="toy benchmark fixture index")
    p.add_argument("--prompt")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("eval", help="compute consistency metrics for an evaluation manifest")
    common(p)
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curate", help="run the synthetic curation pipeline")
    common(p)
    p.add_argument("--count", type=int, default=10, help="number of default specs when the config lists none")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("report", help="aggregate a metric table per scene type")
    common(p)
    p.add_argument("--table")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("ablation", help="layout-scheme and view-count ablations")
    common(p)
    p.add_argument("--steps", type=int, help="training steps per scheme")
    p.add_argument("--sample-steps", dest="sample_steps", type=int)
    p.add_argument("--delta", type=int)
    p.add_argument("--omega-ref", dest="omega_ref", type=float)
    p.add_argument("--omega-text", dest="omega_text", type=float)
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir")
    p.add_argument("--no-inline-train", action="store_true")
    p.set_defaults(func=cmd_ablation)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mvs2v {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        if args.verbose:
            log.exception("command failed")
        print(f"mvs2v {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
