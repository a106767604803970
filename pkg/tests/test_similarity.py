import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from devicevec.embedding import TrainingConfig, train_skipgram
from devicevec.errors import DimensionMismatch, UnknownToken
from devicevec.similarity import (DeviceTypeRegistry, EmptyRegistry, ZeroVector, cosine, embed_new_device,
                                  identify_device_type, load_registry, save_registry, similarity_matrix,
                                  top_k_neighbors)

from props import check_similarity_invariances, make_model


def test_cosine_basics():
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([2, 0], [5, 0]) == 1.0
    with pytest.raises(ZeroVector):
        cosine([0, 0], [1, 0])
    with pytest.raises(DimensionMismatch):
        cosine([1, 0], [1, 0, 0])


def brute_force_neighbors(tokens, vecs, q, k):
    out = []
    for j, t in enumerate(tokens):
        if j == q:
            continue
        a, b = vecs[q].astype(np.float64), vecs[j].astype(np.float64)
        out.append((t, float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))))
    out.sort(key=lambda p: (-p[1], p[0]))
    return out[:k]


def test_top_k_matches_brute_force(rng):
    for _ in range(20):
        tokens = [f"T{i:02d}" for i in range(20)]
        vecs = rng.normal(size=(20, 8)).astype(np.float32)
        model = make_model(tokens, vecs)
        for q in range(20):
            got = top_k_neighbors(model, tokens[q], 5).neighbors
            want = brute_force_neighbors(tokens, vecs, q, 5)
            assert [t for t, _ in got] == [t for t, _ in want]
            np.testing.assert_allclose([s for _, s in got], [s for _, s in want], atol=1e-9)


def test_top_k_caps_and_ties():
    model = make_model(["c", "b", "a", "q"], [[1, 0], [1, 0], [1, 0], [1, 0]])
    assert [t for t, _ in top_k_neighbors(model, "q", 10).neighbors] == ["a", "b", "c"]
    with pytest.raises(UnknownToken):
        top_k_neighbors(model, "nope")


def test_euclidean_metric():
    model = make_model(["a", "b", "c"], [[0, 0.1], [0, 1], [0, 5]])
    nl = top_k_neighbors(model, "a", 2, metric="euclidean")
    assert [t for t, _ in nl.neighbors] == ["b", "c"]
    assert nl.neighbors[0][1] == pytest.approx(-0.9)


def test_neighbor_formats():
    model = make_model(["D008", "M017", "M016"], [[1, 0.1], [1, 0.2], [0.2, 1]])
    nl = top_k_neighbors(model, "D008", 2)
    assert nl.format().startswith("D008 [('M017', 0.")
    assert len(nl.lines()) == 2
    assert json.loads(json.dumps(nl.to_json()))["query"] == "D008"


def test_similarity_matrix_properties(rng):
    model = make_model([f"t{i}" for i in range(15)], rng.normal(size=(15, 6)))
    sim = similarity_matrix(model)
    np.testing.assert_allclose(np.diag(sim), 1.0, atol=1e-9)
    np.testing.assert_allclose(sim, sim.T, atol=1e-9)
    assert similarity_matrix(make_model(["x"], [[0.3, 0.4]])).tolist() == [[1.0]]


def test_identify_examples():
    reg = DeviceTypeRegistry({"type_1": np.array([0.2, 0.5, 0.1]), "type_2": np.array([1.0, 0.0, 0.0])})
    r = identify_device_type(reg, [0.2, 0.5, 0.1], 0.9)
    assert r.identified and r.device_type == "type_1" and r.score == pytest.approx(1.0)
    r = identify_device_type(reg, [0.0, -1.0, 0.0], 0.3)
    assert not r.identified and r.verdict == "Unknown" and r.device_type in ("type_1", "type_2")
    reg = DeviceTypeRegistry({"A": np.array([1.0, 0.0]), "B": np.array([0.0, 1.0])})
    r = identify_device_type(reg, [0.6, 0.8], 0.7)
    assert r.identified and r.device_type == "B" and r.score == pytest.approx(0.8)
    assert r.format().startswith("Identified type=B")


def test_identify_tie_breaks_by_label():
    reg = DeviceTypeRegistry({"zeta": np.array([1.0, 0.0]), "alpha": np.array([2.0, 0.0])})
    assert identify_device_type(reg, [1, 0]).device_type == "alpha"


def test_identify_errors():
    with pytest.raises(EmptyRegistry):
        identify_device_type(DeviceTypeRegistry({}), [1.0])
    with pytest.raises(DimensionMismatch):
        identify_device_type(DeviceTypeRegistry({"a": np.ones(3)}), np.ones(2))
    with pytest.raises(ValueError):
        DeviceTypeRegistry({"a": np.zeros(3)})


def test_registry_from_model_centroids():
    model = make_model(["M1", "M2", "D1"], [[1, 0], [0, 1], [5, 5]])
    reg = DeviceTypeRegistry.from_model(model, {"M1": "room", "M2": "room", "D1": "hall"}, exclude={"D1"})
    assert list(reg.entries) == ["room"]
    np.testing.assert_allclose(reg.entries["room"], [0.5, 0.5])


def test_registry_round_trip(tmp_path):
    reg = DeviceTypeRegistry({"Kitchen": np.array([0.25, -1.5]), "Bath": np.array([3.0, 0.5])})
    save_registry(reg, tmp_path / "r.bin")
    back = load_registry(tmp_path / "r.bin")
    assert list(back.entries) == list(reg.entries)
    for k in reg.entries:
        np.testing.assert_array_equal(back.entries[k], reg.entries[k])


def _shadow_corpus(rng, n=600):
    sessions = []
    for _ in range(n):
        if rng.random() < 0.5:
            s = list(rng.choice(["a", "b", "c", "d", "e"], size=5))
            # NEW stands in for SHADOW in the same surroundings
            i = int(rng.integers(len(s) + 1))
            s[i:i] = ["P", "NEW" if rng.random() < 0.5 else "SHADOW", "Q"]
        else:
            s = list(rng.choice(["x", "y", "z", "w"], size=6))
        sessions.append(s)
    return sessions


def test_embed_new_device_shadow():
    for seed in range(5):
        corpus = _shadow_corpus(np.random.default_rng(seed))
        cfg = TrainingConfig(dim=20, epochs=10, seed=seed)
        model = train_skipgram(corpus, cfg)
        top = top_k_neighbors(model, "NEW", 1).neighbors[0][0]
        assert top == "SHADOW"
        vec = embed_new_device(corpus, cfg, "NEW")
        np.testing.assert_array_equal(vec, model.vector("NEW"))


def test_embed_new_device_edge_cases():
    cfg = TrainingConfig(dim=8, epochs=2)
    vec = embed_new_device([["a", "b", "ONCE"], ["a", "b"]], cfg, "ONCE")
    assert np.isfinite(vec).all()
    with pytest.raises(UnknownToken):
        embed_new_device([["a", "b"]], cfg, "ABSENT")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_invariances_property(seed):
    check_similarity_invariances(np.random.default_rng(seed))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_neighbor_order_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    tokens = [f"t{i}" for i in range(8)]
    vecs = rng.normal(size=(8, 5))
    scaled = vecs * rng.uniform(1e-3, 1e3, size=(8, 1)) * scale
    a = top_k_neighbors(make_model(tokens, vecs.astype(np.float64)), "t0", 7)
    b = top_k_neighbors(make_model(tokens, scaled.astype(np.float64)), "t0", 7)
    np.testing.assert_allclose([s for _, s in a.neighbors], [s for _, s in b.neighbors], atol=1e-5)
