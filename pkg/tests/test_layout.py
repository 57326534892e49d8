import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvs2v.layout import (
    LatentGrid,
    LayoutScheme,
    ReferenceShape,
    build_layout,
    build_ss_layout,
    build_ts_layout,
    build_vanilla_layout,
)


def ref_frames(layout):
    """{(subject, view): sorted set of t values}"""
    out = {}
    for (t, _, _), s, v in zip(layout.positions.tolist(), layout.subject.tolist(), layout.view.tolist()):
        if s >= 0:
            out.setdefault((s, v), set()).add(t)
    return out


def unique_positions(layout):
    return len({tuple(p) for p in layout.positions.tolist()}) == len(layout)


# --- vanilla -----------------------------------------------------------------


def test_vanilla_no_refs_is_video_only():
    lay = build_vanilla_layout(LatentGrid(2, 1, 1), ReferenceShape([]))
    assert lay.positions.tolist() == [[0, 0, 0], [1, 0, 0]]
    assert lay.is_video.all()


def test_vanilla_one_view_each_subject():
    lay = build_vanilla_layout(LatentGrid(2, 1, 1), ReferenceShape([1, 1]))
    assert ref_frames(lay) == {(0, 0): {2}, (1, 0): {3}}


def test_vanilla_counts_and_uniqueness():
    lay = build_vanilla_layout(LatentGrid(3, 2, 2), ReferenceShape([2]))
    assert lay.num_video_tokens == 12
    assert len(lay) - lay.num_video_tokens == 8
    assert ref_frames(lay) == {(0, 0): {3}, (0, 1): {4}}
    assert unique_positions(lay)


# --- spatial shift -----------------------------------------------------------


def test_ss_views_tile_along_width():
    lay = build_ss_layout(LatentGrid(1, 1, 1), ReferenceShape([2]))
    refs = lay.positions[~lay.is_video].tolist()
    assert refs == [[1, 0, 0], [1, 0, 1]]


def test_ss_subjects_take_successive_frames():
    lay = build_ss_layout(LatentGrid(1, 1, 1), ReferenceShape([1, 1]))
    assert lay.positions[~lay.is_video].tolist() == [[1, 0, 0], [2, 0, 0]]


def test_ss_three_views_one_frame():
    lay = build_ss_layout(LatentGrid(2, 2, 3), ReferenceShape([3]))
    refs = lay.positions[~lay.is_video]
    assert len(refs) == 18
    assert set(refs[:, 0].tolist()) == {2}
    assert refs[:, 2].min() == 0 and refs[:, 2].max() == 8
    assert unique_positions(lay)


# --- temporal shift ----------------------------------------------------------


def test_ts_gap_example():
    lay = build_ts_layout(LatentGrid(2, 1, 1), ReferenceShape([2, 1]), delta=3)
    assert set(lay.positions[lay.is_video, 0].tolist()) == {0, 1}
    assert ref_frames(lay) == {(0, 0): {4}, (0, 1): {5}, (1, 0): {8}}


def test_ts_minimal():
    lay = build_ts_layout(LatentGrid(1, 1, 1), ReferenceShape([1]), delta=1)
    assert lay.positions[~lay.is_video, 0].tolist() == [1]


def test_ts_default_delta_gap():
    lay = build_ts_layout(LatentGrid(4, 1, 1), ReferenceShape([3]), delta=16)
    frames = sorted(set(lay.positions[:, 0].tolist()))
    assert frames == [0, 1, 2, 3, 19, 20, 21]
    assert max(np.diff(frames)) == 16


@pytest.mark.parametrize("delta", [0, -2, 1.5])
def test_ts_rejects_bad_delta(delta):
    with pytest.raises(ValueError):
        build_ts_layout(LatentGrid(2, 1, 1), ReferenceShape([1]), delta=delta)


def test_bad_shapes_rejected():
    with pytest.raises(ValueError):
        LatentGrid(0, 1, 1)
    with pytest.raises(ValueError):
        ReferenceShape([2, 0])


def test_scheme_parse():
    assert LayoutScheme.parse("TS") is LayoutScheme.TS
    assert LayoutScheme.parse(LayoutScheme.SS) is LayoutScheme.SS
    with pytest.raises(ValueError):
        LayoutScheme.parse("diagonal")


# --- properties --------------------------------------------------------------

shapes = st.tuples(
    st.integers(1, 5),
    st.integers(1, 4),
    st.integers(1, 4),
    st.lists(st.integers(1, 4), max_size=4),
    st.integers(1, 20),
)


@settings(max_examples=150, deadline=None)
@given(shapes, st.sampled_from(list(LayoutScheme)))
def test_positions_unique_and_video_block_is_a_full_grid(shape, scheme):
    T, H, W, views, delta = shape
    lay = build_layout(scheme, LatentGrid(T, H, W), ReferenceShape(views), delta)
    assert unique_positions(lay)
    assert len(lay) == H * W * (T + sum(views))
    video = lay.positions[lay.is_video]
    assert video[:, 0].max() == T - 1 and video[:, 1].max() == H - 1 and video[:, 2].max() == W - 1


@settings(max_examples=150, deadline=None)
@given(shapes)
def test_ts_gap_rule(shape):
    T, H, W, views, delta = shape
    frames = ref_frames(build_ts_layout(LatentGrid(T, H, W), ReferenceShape(views), delta))
    prev_last = T - 1
    for s, m_count in enumerate(views):
        ts = [min(frames[(s, m)]) for m in range(m_count)]
        assert ts[0] - prev_last == delta
        assert all(b - a == 1 for a, b in zip(ts, ts[1:]))
        prev_last = ts[-1]


@settings(max_examples=150, deadline=None)
@given(shapes)
def test_ss_single_frame_per_subject(shape):
    T, H, W, views, _ = shape
    frames = ref_frames(build_ss_layout(LatentGrid(T, H, W), ReferenceShape(views)))
    for s, m_count in enumerate(views):
        assert {t for m in range(m_count) for t in frames[(s, m)]} == {T + s}


@settings(max_examples=150, deadline=None)
@given(shapes)
def test_vanilla_frames_have_no_holes(shape):
    T, H, W, views, _ = shape
    lay = build_vanilla_layout(LatentGrid(T, H, W), ReferenceShape(views))
    assert sorted(set(lay.positions[:, 0].tolist())) == list(range(T + sum(views)))
