import math

import pytest

from mvs2v.metrics.consistency import METRIC_COLUMNS
from mvs2v.metrics.evaluation import read_table, write_table
from mvs2v.report import render_table, report


def row(sample_id, scene, base):
    return {"sample_id": sample_id, "scene": scene, **{c: base + i / 10 for i, c in enumerate(METRIC_COLUMNS)}}


def test_single_row(tmp_path):
    r = row("a", "OC", 0.25)
    write_table([r], tmp_path / "t.csv")
    blocks = report(tmp_path / "t.csv", tmp_path / "out", figures=False)
    assert list(blocks) == ["OC"]
    for c in METRIC_COLUMNS:
        assert blocks["OC"][c] == r[c]


def test_two_scenes(tmp_path):
    write_table([row("a", "HOI", 0.1), row("b", "OC", 0.2)], tmp_path / "t.csv")
    blocks = report(tmp_path / "t.csv", tmp_path / "out")
    assert list(blocks) == ["OC", "HOI"]
    assert len(list((tmp_path / "out").glob("fig_*.png"))) == len(METRIC_COLUMNS)
    assert (tmp_path / "out" / "aggregate.md").read_text() == render_table(blocks)


def test_four_row_means(tmp_path):
    rows = [row("a", "OC", 0.1), row("b", "OC", 0.4), row("c", "HOI", 0.3), row("d", "HOI", 0.9)]
    write_table(rows, tmp_path / "t.csv")
    blocks = report(tmp_path / "t.csv", tmp_path / "out", figures=False)
    # hand averages: OC (0.1 + 0.4) / 2 = 0.25, HOI (0.3 + 0.9) / 2 = 0.6
    assert math.isclose(blocks["OC"]["s_dino_v2r"], 0.25)
    assert math.isclose(blocks["HOI"]["s_dino_v2r"], 0.6)
    assert math.isclose(blocks["HOI"]["d_nn_r2v"], 0.6 + 0.7)
    lines = (tmp_path / "out" / "aggregate.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "scene" and len(lines) == 3


def test_nan_cells_are_skipped(tmp_path):
    a, b = row("a", "OC", 0.2), row("b", "OC", 0.4)
    b["s_clip_v2r"] = float("nan")
    write_table([a, b], tmp_path / "t.csv")
    blocks = report(tmp_path / "t.csv", tmp_path / "out", figures=False)
    assert blocks["OC"]["s_clip_v2r"] == a["s_clip_v2r"]


def test_table_roundtrip_drops_aggregate(tmp_path):
    rows = [row("a", "OC", 0.1), row("b", "HOI", 0.2)]
    write_table(rows, tmp_path / "t.csv")
    assert read_table(tmp_path / "t.csv") == rows


def test_bad_tables(tmp_path):
    (tmp_path / "bad.csv").write_text("sample_id,scene\na,OC\n")
    with pytest.raises(ValueError):
        read_table(tmp_path / "bad.csv")
    write_table([], tmp_path / "empty.csv")
    with pytest.raises(ValueError):
        report(tmp_path / "empty.csv", tmp_path / "out")
