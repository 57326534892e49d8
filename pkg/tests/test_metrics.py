import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from mvs2v.metrics import kernels
from mvs2v.metrics.backends import HistogramEmbedding, MetricBackends, ToyPairScore
from mvs2v.metrics.consistency import (
    METRIC_COLUMNS,
    Role,
    ViewSet,
    directional_min,
    directional_pair_score,
    directional_similarity,
    evaluate,
    evaluate_views,
    nn_distance,
    similarity_matrix,
)


def images(rng, n, size=6):
    return [rng.random((size, size, 3)) for _ in range(n)]


class Fixed:
    """Embedding backend returning preset vectors in call order."""

    name = "fixed"

    def __init__(self, vecs):
        self.vecs = iter(vecs)

    def embed(self, image):
        return np.asarray(next(self.vecs), dtype=float)


def test_self_similarity_is_one(rng):
    im = images(rng, 1)
    m = similarity_matrix(ViewSet(im), ViewSet(im, Role.REFERENCE), HistogramEmbedding())
    assert m.tolist() == [[1.0]]


def test_orthogonal_embeddings():
    gen, ref = ViewSet([np.zeros((1, 1, 1))]), ViewSet([np.zeros((1, 1, 1))])
    assert similarity_matrix(gen, ref, Fixed([[1, 0], [0, 1]])).tolist() == [[0.0]]


def test_similarity_matrix_oracle(rng):
    gen, ref = images(rng, 3), images(rng, 2)
    got = similarity_matrix(ViewSet(gen), ViewSet(ref), HistogramEmbedding())
    np.testing.assert_allclose(got, oracles.cosine_table(gen, ref, oracles.hist_embed), atol=1e-12)


def test_directional_examples():
    m = [[1.0, 0.0], [0.7071, 0.7071]]
    assert math.isclose(directional_similarity(m, "v2r"), (1 + 0.7071) / 2)
    assert directional_similarity(np.eye(2), "v2r") == directional_similarity(np.eye(2), "r2v") == 1.0
    assert directional_similarity([[0.3]], "v2r") == directional_similarity([[0.3]], "r->v") == 0.3
    with pytest.raises(ValueError):
        directional_similarity(np.zeros((0, 2)), "v2r")


def test_pair_score_cases(rng):
    im = images(rng, 2)
    toy = ToyPairScore()
    for d in ("v2r", "r2v"):
        assert directional_pair_score(ViewSet(im), ViewSet(im), toy, d) == 0.0
    a, b = images(rng, 2)
    s = toy.score(a, b)
    assert 0 < s <= 1
    for d in ("v2r", "r2v"):
        assert directional_pair_score(ViewSet([a]), ViewSet([b]), toy, d) == s


def test_pair_score_table_oracle(rng):
    table = rng.random((3, 4))
    assert abs(directional_min(table, "v2r") - oracles.v2r_min(table.tolist())) < 1e-9
    assert abs(directional_min(table, "r2v") - oracles.r2v_min(table.tolist())) < 1e-9


def test_nn_cases(rng):
    p = rng.random((10, 3))
    assert nn_distance(p, p) == 0.0
    assert nn_distance([[0, 0, 0]], [[1, 0, 0]]) == nn_distance([[1, 0, 0]], [[0, 0, 0]]) == 1.0
    a, b = rng.random((50, 3)), rng.random((70, 3))
    assert abs(nn_distance(a, b) - oracles.nn(a.tolist(), b.tolist())) < 1e-9
    with pytest.raises(ValueError):
        nn_distance(np.zeros((0, 3)), b)


def test_nn_kernels_agree(rng):
    a, b = rng.random((300, 3)), rng.random((1100, 3))
    np.testing.assert_allclose(kernels.nn_distances_numba(a, b), kernels.nn_distances_numpy(a, b), atol=1e-12)


def test_histogram_kernels_agree(rng):
    im = rng.random((9, 7, 3))
    im[0, 0] = [0.0, 1.0, 0.999999]
    np.testing.assert_array_equal(kernels.channel_histogram_numba(im, 8), kernels.channel_histogram_numpy(im, 8))


def test_identical_sets_exact(rng):
    im = images(rng, 3)
    r = evaluate_views(im, im)
    for c in METRIC_COLUMNS:
        expected = 1.0 if c.startswith(("s_dino", "s_clip")) else 0.0
        assert r.values[c] == expected, c


def test_strict_subset(rng):
    ref = images(rng, 3)
    r = evaluate_views(ref[:2], ref)
    assert r.values["s_dino_v2r"] == 1.0
    assert r.values["s_dino_r2v"] < 1.0


def test_fixture_matches_hand_run(rng):
    gen, ref = images(rng, 3), images(rng, 2)
    got = evaluate_views(gen, ref).values
    want = oracles.all_eight(gen, ref)
    for c in METRIC_COLUMNS:
        assert abs(got[c] - want[c]) < 1e-9, c


def test_failing_backend_is_isolated(rng):
    class Broken:
        name = "broken"

        def embed(self, image):
            raise RuntimeError("boom")

    backends = MetricBackends.toy()
    backends.clip = Broken()
    r = evaluate(ViewSet(images(rng, 2)), ViewSet(images(rng, 2)), backends)
    assert math.isnan(r.values["s_clip_v2r"]) and math.isnan(r.values["s_clip_r2v"])
    assert "clip" in r.errors and "boom" in r.errors["clip"]
    assert all(not math.isnan(r.values[c]) for c in METRIC_COLUMNS if "clip" not in c)


def test_recompute_matches(rng):
    r = evaluate_views(images(rng, 3), images(rng, 4))
    assert r.recompute() == r.values


def test_viewset_validation():
    with pytest.raises(ValueError):
        ViewSet([])
    with pytest.raises(ValueError):
        ViewSet([np.zeros((2, 2, 3)), np.zeros((2, 2, 1))])


# --- properties --------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_role_symmetry(seed, n, m):
    rng = np.random.default_rng(seed)
    gen, ref = images(rng, n, 4), images(rng, m, 4)
    a, b = evaluate_views(gen, ref).values, evaluate_views(ref, gen).values
    for base in ("s_dino", "s_clip", "s_met3r", "d_nn"):
        assert a[f"{base}_v2r"] == b[f"{base}_r2v"]
        assert a[f"{base}_r2v"] == b[f"{base}_v2r"]


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_permutation_invariance(seed, n, m):
    rng = np.random.default_rng(seed)
    gen, ref = images(rng, n, 4), images(rng, m, 4)
    base = evaluate_views(gen, ref).values
    perm = evaluate_views([gen[i] for i in rng.permutation(n)], [ref[i] for i in rng.permutation(m)]).values
    assert base == perm


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(1, 5))
def test_monotone_in_added_views(seed, n, m):
    rng = np.random.default_rng(seed)
    sim = rng.uniform(-1, 1, (n, m + 1))
    assert directional_similarity(sim, "v2r") >= directional_similarity(sim[:, :m], "v2r")
    sim = rng.uniform(-1, 1, (n + 1, m))
    assert directional_similarity(sim, "r2v") >= directional_similarity(sim[:n], "r2v")
    score = rng.random((n, m + 1))
    assert directional_min(score, "v2r") <= directional_min(score[:, :m], "v2r")
    score = rng.random((n + 1, m))
    assert directional_min(score, "r2v") <= directional_min(score[:n], "r2v")
    src, dst = rng.random((n * 3, 3)), rng.random((m * 3 + 2, 3))
    assert nn_distance(src, dst) <= nn_distance(src, dst[:-2])
