"""Aggregate metric tables per scene type and draw per-metric bar charts."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

from .metrics.consistency import HIGHER_IS_BETTER, METRIC_COLUMNS
from .metrics.evaluation import aggregate, read_table

SCENE_ORDER = ("OC", "HOI")

PRETTY = {
    "s_dino_v2r": "S_dino v->r", "s_dino_r2v": "S_dino r->v",
    "s_clip_v2r": "S_clip v->r", "s_clip_r2v": "S_clip r->v",
    "s_met3r_v2r": "S_met3r v->r", "s_met3r_r2v": "S_met3r r->v",
    "d_nn_v2r": "D_nn v->r", "d_nn_r2v": "D_nn r->v",
}


def aggregate_by_scene(rows: Sequence[dict]) -> dict[str, dict]:
    scenes = [s for s in SCENE_ORDER if any(r["scene"] == s for r in rows)]
    scenes += sorted({r["scene"] for r in rows} - set(SCENE_ORDER))
    return {s: aggregate([r for r in rows if r["scene"] == s], label="mean", scene=s) for s in scenes}


def render_table(blocks: dict[str, dict]) -> str:
    arrows = {c: "(+)" if HIGHER_IS_BETTER[c] else "(-)" for c in METRIC_COLUMNS}
    header = "| scene | " + " | ".join(f"{PRETTY[c]} {arrows[c]}" for c in METRIC_COLUMNS) + " |"
    sep = "|---" * (len(METRIC_COLUMNS) + 1) + "|"
    lines = [header, sep]
    for scene, agg in blocks.items():
        cells = ["nan" if math.isnan(agg[c]) else f"{agg[c]:.4f}" for c in METRIC_COLUMNS]
        lines.append(f"| {scene} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def draw_figures(blocks: dict[str, dict], out_dir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    scenes = list(blocks)
    for col in METRIC_COLUMNS:
        fig, ax = plt.subplots(figsize=(3.2, 2.4), dpi=100)
        ax.bar(scenes, [blocks[s][col] for s in scenes], color=["#4C72B0", "#DD8452", "#55A868"][: len(scenes)])
        ax.set_title(PRETTY[col], fontsize=9)
        ax.tick_params(labelsize=8)
        fig.tight_layout()
        path = out_dir / f"fig_{col}.png"
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
        paths.append(path)
    return paths


def report(table_path: str | Path, out_dir: str | Path, figures: bool = True) -> dict[str, dict]:
    """Write ``aggregate.csv``, ``aggregate.md`` and one bar chart per metric."""
    rows = read_table(table_path)
    if not rows:
        raise ValueError(f"{table_path}: table has no sample rows")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    blocks = aggregate_by_scene(rows)

    with open(out / "aggregate.csv", "w") as fh:
        fh.write("scene," + ",".join(METRIC_COLUMNS) + "\n")
        for scene, agg in blocks.items():
            fh.write(scene + "," + ",".join(repr(agg[c]) for c in METRIC_COLUMNS) + "\n")
    (out / "aggregate.md").write_text(render_table(blocks))
    if figures:
        draw_figures(blocks, out)
    return blocks
