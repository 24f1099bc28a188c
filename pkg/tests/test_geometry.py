import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from probpol.geometry import (
    DegenerateCentroidError,
    Embedder,
    SphericalCap,
    caps_intersect,
    centroid,
    centroid_separation_report,
    cosine,
    fnv1a64,
    group_fire,
    pseudo_embed,
    splitmix64,
    tokens,
    voronoi_scores,
)

sims_st = st.lists(st.floats(-1, 1, allow_nan=False), min_size=2, max_size=6)
temps = st.floats(0.01, 1.0)


# -- pseudo embeddings ------------------------------------------------------


def test_fnv1a_reference_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_splitmix64_reference_sequence():
    assert splitmix64(0, 3) == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_tokens():
    assert tokens("Integral of sin(x)!") == ["integral", "of", "sin", "x"]
    assert tokens("snake_case words") == ["snake", "case", "words"]
    assert tokens("Café  Ünïcode") == ["café", "ünïcode"]


def test_empty_text_embeds_to_first_basis_vector():
    e = pseudo_embed("   ", 8)
    assert e.tolist() == [1.0] + [0.0] * 7


def test_identical_text_has_cosine_one():
    assert cosine(pseudo_embed("dna replication"), centroid(["dna replication"])) == pytest.approx(1.0)


def test_case_and_punctuation_insensitive():
    assert np.allclose(pseudo_embed("Hello, World"), pseudo_embed("hello world"))


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=40), st.integers(2, 128))
def test_embedding_is_unit_and_deterministic(text, dim):
    e = pseudo_embed(text, dim)
    assert e.shape == (dim,)
    assert np.linalg.norm(e) == pytest.approx(1.0)
    assert np.array_equal(e, pseudo_embed(text, dim))


def test_single_token_components_in_unit_interval():
    # before normalization each component is (u >> 11) * 2**-53 * 2 - 1
    from probpol.geometry import _token_vector

    vals = np.array([_token_vector(f"tok{i}", 64) for i in range(200)])
    assert vals.min() >= -1.0 and vals.max() < 1.0
    assert vals.min() < -0.9 and vals.max() > 0.9


def test_vector_table_override(tmp_path):
    path = tmp_path / "vectors.json"
    path.write_text(json.dumps({"math": [3, 4, 0], "physics": [0, 0, 2]}))
    emb = Embedder.from_json(path)
    assert emb.dim == 3
    assert np.allclose(emb.embed("math"), [0.6, 0.8, 0])
    assert np.allclose(emb.embed("physics"), [0, 0, 1])
    assert np.allclose(emb.embed("other"), pseudo_embed("other", 3))


def test_vector_table_rejects_ragged(tmp_path):
    path = tmp_path / "vectors.json"
    path.write_text(json.dumps({"a": [1, 0], "b": [1, 0, 0]}))
    with pytest.raises(ValueError):
        Embedder.from_json(path)


def test_degenerate_centroid():
    emb = Embedder(4, {"x": [1, 0, 0, 0], "y": [-1, 0, 0, 0]})
    with pytest.raises(DegenerateCentroidError):
        emb.centroid(["x", "y"])
    with pytest.raises(ValueError):
        emb.centroid([])


# -- caps -------------------------------------------------------------------


def test_identical_caps_margin():
    c = pseudo_embed("invoice payment")
    rel = caps_intersect(SphericalCap(c, 0.8), SphericalCap(c, 0.8))
    assert rel.intersect
    assert rel.margin == pytest.approx(2 * math.acos(0.8))


def test_orthogonal_caps_disjoint():
    rel = caps_intersect(SphericalCap(np.eye(4)[0], 0.9), SphericalCap(np.eye(4)[1], 0.9))
    assert not rel.intersect
    assert rel.margin == pytest.approx(math.pi / 2 - 2 * math.acos(0.9))


def test_cap_threshold_range():
    with pytest.raises(ValueError):
        SphericalCap(np.eye(3)[0], 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_caps_intersect_symmetric(seed):
    rng = np.random.default_rng(seed)
    ca, ta, cb, tb, _, _ = oracles.cap_pair(rng)
    x = caps_intersect(SphericalCap(ca, ta), SphericalCap(cb, tb))
    y = caps_intersect(SphericalCap(cb, tb), SphericalCap(ca, ta))
    assert x.intersect == y.intersect and x.margin == pytest.approx(y.margin)


def test_intersection_witness_on_arc():
    # constructive check: the arc point at angle r_a from c_a is in both caps
    rng = np.random.default_rng(1)
    for _ in range(200):
        ca, ta, cb, tb, sep, rsum = oracles.cap_pair(rng)
        rel = caps_intersect(SphericalCap(ca, ta), SphericalCap(cb, tb))
        if not rel.intersect or rel.margin < 1e-6:
            continue
        w = cb - (cb @ ca) * ca
        w /= np.linalg.norm(w)
        phi = min(math.acos(ta), sep)
        p = math.cos(phi) * ca + math.sin(phi) * w
        assert p @ ca >= ta - 1e-9 and p @ cb >= tb - 1e-9


# -- voronoi ----------------------------------------------------------------


def test_worked_example_values():
    got = voronoi_scores([0.52, 0.89, 0.31], 0.1)
    assert np.allclose(got, oracles.softmax([0.52, 0.89, 0.31], 0.1), atol=1e-12)
    assert group_fire(got, 0.5) == {1}


@settings(max_examples=300, deadline=None)
@given(sims_st, temps)
def test_normalization(sims, t):
    s = voronoi_scores(sims, t)
    assert abs(s.sum() - 1) < 1e-9
    assert np.all(s > 0) or t < 0.05  # underflow to exactly 0 only at very low T
    assert np.all(s <= 1)


@settings(max_examples=300, deadline=None)
@given(sims_st, st.floats(1e-3, 100))
def test_argmax_preserved(sims, t):
    s = voronoi_scores(sims, t)
    # differences below float resolution of sims/t legitimately tie
    assert sims[int(np.argmax(s))] >= max(sims) - 1e-12 * max(1.0, t)


@settings(max_examples=200, deadline=None)
@given(sims_st)
def test_high_temperature_flattens(sims):
    s = voronoi_scores(sims, 100.0)
    assert s.max() - s.min() < 0.01


def test_low_temperature_clamped():
    s = voronoi_scores([0.3, 0.2], 1e-12)
    assert s.tolist() == [1.0, 0.0]
    with pytest.raises(ValueError):
        voronoi_scores([0.1], 0.0)


def test_exclusivity_holds_from_one_half():
    # softmax scores sum to 1, so two of them can exceed theta only if theta < 1/2
    rng = random.Random(20240601)
    for _ in range(10_000):
        k = rng.randint(2, 6)
        sims = [rng.uniform(-1, 1) for _ in range(k)]
        theta = max(1 / k + 0.01, 0.5)
        assert len(group_fire(voronoi_scores(sims, rng.uniform(0.01, 1.0)), theta)) <= 1


def test_one_over_k_plus_counterexample_exists():
    s = voronoi_scores([0.4, 0.4, -1.0], 1.0)
    theta = 1 / 3 + 0.01
    assert len(group_fire(s, theta)) == 2


def test_centroid_separation_report():
    cents = [np.array([1.0, 0, 0]), unit([1, 0.1, 0]), np.array([0, 0, 1.0])]
    rep = centroid_separation_report(cents, 0.95)
    assert [(i, j) for i, j, _ in rep] == [(0, 1)]
    with pytest.raises(ValueError):
        centroid_separation_report(cents[:1])


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)
