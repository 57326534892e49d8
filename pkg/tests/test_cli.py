import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from mvs2v.cli import frames_to_images, main

GOLDEN = Path(__file__).parent / "golden"


def frames_in(text):
    return sorted({int(line.split()[0]) for line in text.splitlines()})


def test_layout_inspect_ts(capsys):
    assert main(["layout-inspect", "--scheme", "ts", "--T", "2", "--views", "2,1", "--delta", "3"]) == 0
    assert frames_in(capsys.readouterr().out) == [0, 1, 4, 5, 8]


def test_layout_inspect_vanilla(capsys):
    assert main(["layout-inspect", "--scheme", "vanilla", "--T", "2", "--views", "2,1"]) == 0
    assert frames_in(capsys.readouterr().out) == [0, 1, 2, 3, 4]


@pytest.mark.parametrize("argv,golden", [
    (["--scheme", "ts", "--T", "2", "--H", "2", "--W", "2", "--views", "2,1", "--delta", "3"],
     "layout_ts_T2_H2_W2_v21_d3.txt"),
    (["--scheme", "ss", "--T", "2", "--H", "1", "--W", "2", "--views", "3"], "layout_ss_T2_H1_W2_v3.txt"),
])
def test_layout_inspect_golden(capsys, argv, golden):
    assert main(["layout-inspect", *argv]) == 0
    assert capsys.readouterr().out == (GOLDEN / golden).read_text()


def test_layout_inspect_to_dir(tmp_path):
    assert main(["layout-inspect", "--T", "1", "--views", "1", "--out", str(tmp_path), "--seed", "9"]) == 0
    assert (tmp_path / "layout.txt").read_text().splitlines()[-1] == "16 0 0 ref:s0:v0"
    assert json.loads((tmp_path / "config.snapshot.json").read_text())["seed"] == 9


@pytest.mark.parametrize("argv", [
    [],
    ["nonsense"],
    ["layout-inspect"],
    ["layout-inspect", "--T", "2", "--scheme", "diag"],
    ["layout-inspect", "--T", "2", "--views", "a,b"],
    ["layout-inspect", "--T", "2", "--views", "1", "--delta", "0"],
    ["sample", "--out", "x"],
    ["train"],
])
def test_usage_errors_exit_1(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_runtime_error_exits_2(tmp_path, capsys):
    code = main(["ablation", "--out", str(tmp_path), "--no-inline-train", "--checkpoint-dir", str(tmp_path / "none")])
    assert code == 2
    assert "inline training is off" in capsys.readouterr().err


def test_eval_missing_file_exits_2(tmp_path):
    assert main(["eval", "--manifest", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)]) == 2


def test_frames_to_images_minmax():
    lat = np.zeros((2, 3, 2, 2))
    lat[0, :, 0, 0] = -2.0
    lat[1, :, 1, 1] = 6.0
    imgs = frames_to_images(lat)
    assert imgs[0].shape == (2, 2, 3) and imgs[0].dtype == np.uint8
    assert imgs[0][0, 0].tolist() == [0, 0, 0]
    assert imgs[1][1, 1].tolist() == [255, 255, 255]
    assert imgs[0][1, 0, 0] == round(2 / 8 * 255)


def test_train_sample_roundtrip(tmp_path, capsys):
    cfg = tmp_path / "train.yaml"
    cfg.write_text("layers: 1\nhead_dim: 12\nsamples: 2\nbatch_size: 2\n")
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(run), "--steps", "3", "--seed", "5", "--scheme", "ss"]) == 0
    snap = json.loads((run / "config.snapshot.json").read_text())
    assert snap["seed"] == 5 and snap["model"]["scheme"] == "ss" and snap["train"]["steps"] == 3
    log = json.loads((run / "train_log.json").read_text())
    assert log["seed"] == 5 and len(log["losses"]) == 3

    out = tmp_path / "gen"
    args = ["sample", "--checkpoint", str(run / "checkpoint.npz"), "--out", str(out), "--steps", "2", "--seed", "4",
            "--views", "2", "--omega-ref", "1.5"]
    assert main(args) == 0
    lat = np.load(out / "latent.npy")
    assert lat.shape == (2, 3, 8, 8)
    pngs = sorted((out / "frames").glob("*.png"))
    assert len(pngs) == 2
    assert np.asarray(Image.open(pngs[0])).shape == (8, 8, 3)
    snap = json.loads((out / "config.snapshot.json").read_text())
    assert snap["seed"] == 4 and snap["guidance"]["omega_ref"] == 1.5 and snap["views_per_subject"] == [2]


def test_sample_is_seeded(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("layers: 1\nhead_dim: 12\nsamples: 1\n")
    main(["train", "--config", str(cfg), "--out", str(tmp_path / "r"), "--steps", "2"])
    ck = str(tmp_path / "r" / "checkpoint.npz")
    for name, seed in (("a", "1"), ("b", "1"), ("c", "2")):
        assert main(["sample", "--checkpoint", ck, "--out", str(tmp_path / name), "--steps", "2", "--seed", seed]) == 0
    a, b, c = (np.load(tmp_path / n / "latent.npy") for n in "abc")
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_curate_eval_report(tmp_path, capsys):
    cur = tmp_path / "cur"
    assert main(["curate", "--out", str(cur), "--count", "4", "--seed", "2"]) == 0
    lines = (cur / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 4
    assert json.loads((cur / "config.snapshot.json").read_text())["seed"] == 2

    rng = np.random.default_rng(0)
    items = []
    for i, scene in enumerate(["OC", "HOI"]):
        gen = [f"g{i}{k}.npy" for k in range(2)]
        ref = [f"r{i}{k}.npy" for k in range(2)]
        for p in gen + ref:
            np.save(tmp_path / p, rng.random((6, 6, 3)))
        items.append({"sample_id": f"s{i}", "scene": scene, "generated": gen, "references": ref})
    (tmp_path / "eval.jsonl").write_text("".join(json.dumps(it) + "\n" for it in items))
    assert main(["eval", "--manifest", str(tmp_path / "eval.jsonl"), "--out", str(tmp_path / "ev")]) == 0
    table = tmp_path / "ev" / "metrics.csv"
    assert len(table.read_text().splitlines()) == 4  # header, 2 rows, aggregate

    assert main(["report", "--table", str(table), "--out", str(tmp_path / "rep")]) == 0
    out = capsys.readouterr().out
    assert "| OC |" in out and "| HOI |" in out
    assert len(list((tmp_path / "rep").glob("fig_*.png"))) == 8


def test_curate_config_file(tmp_path):
    cfg = tmp_path / "cur.yaml"
    cfg.write_text(
        "seed: 1\nspecs:\n  - {asset_id: a1, category: book, color: red, scene: OC}\n"
        "  - {asset_id: a2, category: figurine, color: blue, scene: HOI}\n"
    )
    assert main(["curate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    recs = [json.loads(l) for l in (tmp_path / "o" / "manifest.jsonl").read_text().splitlines()]
    assert [r["grounding_prompt"] for r in recs] == ["the most salient book", "the handheld figurine"]


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "mvs2v", "layout-inspect", "--T", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "0 0 0 video\n"
    res = subprocess.run([sys.executable, "-m", "mvs2v", "layout-inspect"], capture_output=True, text=True)
    assert res.returncode == 1
