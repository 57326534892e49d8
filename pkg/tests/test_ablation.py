import pytest

from mvs2v.ablation import AblationConfig, MissingCheckpointError, run_ablation
from mvs2v.metrics.consistency import METRIC_COLUMNS

FAST = AblationConfig(train_steps=2, train_samples=4, benchmark_samples=1, sample_steps=2, layers=1, head_dim=12)


@pytest.fixture(scope="module")
def tables(tmp_path_factory):
    out = tmp_path_factory.mktemp("ablation")
    return run_ablation(FAST, out), out


def test_row_structure(tables):
    t, _ = tables
    assert [r["variant"] for r in t["schemes"]] == ["Vanilla", "SS-RoPE", "TS-RoPE"]
    assert [r["variant"] for r in t["views"]] == ["1", "2", "3", "4"]
    for rows in t.values():
        for r in rows:
            assert list(r)[1:] == list(METRIC_COLUMNS)


def test_csv_written(tables):
    _, out = tables
    schemes = (out / "ablation_schemes.csv").read_text().splitlines()
    views = (out / "ablation_views.csv").read_text().splitlines()
    assert len(schemes) == 4 and len(views) == 5
    assert schemes[0].split(",") == ["variant", *METRIC_COLUMNS]


def test_deterministic(tables):
    t, _ = tables
    assert run_ablation(FAST) == t


def test_checkpoints_reused(tmp_path):
    cfg = AblationConfig(**{**FAST.__dict__, "checkpoint_dir": str(tmp_path)})
    first = run_ablation(cfg)
    assert sorted(p.name for p in tmp_path.glob("*.npz")) == ["ss.npz", "ts.npz", "vanilla.npz"]
    strict = AblationConfig(**{**cfg.__dict__, "inline_train": False})
    assert run_ablation(strict) == first


def test_missing_checkpoint(tmp_path):
    cfg = AblationConfig(**{**FAST.__dict__, "checkpoint_dir": str(tmp_path), "inline_train": False})
    with pytest.raises(MissingCheckpointError):
        run_ablation(cfg)
