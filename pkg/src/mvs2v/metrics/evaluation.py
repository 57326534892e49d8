"""Evaluation manifests in, metric tables out."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .backends import MetricBackends
from .consistency import METRIC_COLUMNS, ConsistencyReport, Role, ViewSet, evaluate

TABLE_COLUMNS = ("sample_id", "scene") + METRIC_COLUMNS


@dataclass
class EvalItem:
    sample_id: str
    scene: str
    generated: list[str]
    references: list[str]

    @classmethod
    def from_dict(cls, d: dict) -> "EvalItem":
        missing = {"sample_id", "generated", "references"} - set(d)
        if missing:
            raise ValueError(f"evaluation record lacks fields {sorted(missing)}")
        scene = str(d.get("scene", "OC")).upper()
        if scene not in ("OC", "HOI"):
            raise ValueError(f"scene must be OC or HOI, got {scene!r}")
        return cls(str(d["sample_id"]), scene, list(d["generated"]), list(d["references"]))

    def to_dict(self) -> dict:
        return {"sample_id": self.sample_id, "scene": self.scene, "generated": self.generated, "references": self.references}


def read_eval_manifest(path: str | Path) -> list[EvalItem]:
    items = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            items.append(EvalItem.from_dict(json.loads(line)))
        except (json.JSONDecodeError, ValueError) as exc:
            raise ValueError(f"{path}:{n}: {exc}") from exc
    return items


def write_eval_manifest(items: Iterable[EvalItem], path: str | Path) -> Path:
    path = Path(path)
    path.write_text("".join(json.dumps(it.to_dict(), sort_keys=True) + "\n" for it in items))
    return path


def load_image(path: str | Path) -> np.ndarray:
    """``.npy`` arrays are taken as-is; other files go through Pillow and are scaled to [0, 1]."""
    path = Path(path)
    if path.suffix == ".npy":
        arr = np.load(path)
    else:
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[..., None]
    return arr


def evaluate_item(item: EvalItem, backends: MetricBackends, root: Path) -> ConsistencyReport:
    gen = ViewSet([load_image(root / p) for p in item.generated], Role.GENERATED)
    ref = ViewSet([load_image(root / p) for p in item.references], Role.REFERENCE)
    return evaluate(gen, ref, backends)


def evaluate_manifest(path: str | Path, backends: MetricBackends | None = None) -> list[dict]:
    backends = backends or MetricBackends.toy()
    root = Path(path).parent
    rows = []
    for item in read_eval_manifest(path):
        report = evaluate_item(item, backends, root)
        rows.append({"sample_id": item.sample_id, "scene": item.scene, **report.values, "errors": report.errors})
    return rows


def aggregate(rows: Sequence[dict], label: str = "mean", scene: str = "ALL") -> dict:
    """Column means, ignoring NaN entries from failed backends."""
    out = {"sample_id": label, "scene": scene}
    for col in METRIC_COLUMNS:
        vals = [float(r[col]) for r in rows if not math.isnan(float(r[col]))]
        out[col] = math.fsum(vals) / len(vals) if vals else math.nan
    return out


def write_table(rows: Sequence[dict], path: str | Path, with_aggregate: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(r[k]) for k in TABLE_COLUMNS})
        if with_aggregate and rows:
            agg = aggregate(rows)
            writer.writerow({k: _fmt(agg[k]) for k in TABLE_COLUMNS})
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def read_table(path: str | Path, drop_aggregate: bool = True) -> list[dict]:
    """Parse a metric table; raises ``ValueError`` on missing columns or bad numbers."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(TABLE_COLUMNS) <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns {list(TABLE_COLUMNS)}, got {reader.fieldnames}")
        rows = []
        for n, raw in enumerate(reader, 2):
            if drop_aggregate and raw["sample_id"] == "mean" and raw["scene"] == "ALL":
                continue
            row = {"sample_id": raw["sample_id"], "scene": raw["scene"]}
            for col in METRIC_COLUMNS:
                try:
                    row[col] = float(raw[col])
                except (TypeError, ValueError):
                    raise ValueError(f"{path}:{n}: column {col} is not a number: {raw[col]!r}") from None
            rows.append(row)
    return rows
