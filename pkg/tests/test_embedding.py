import io
import math

import numpy as np
import pytest

from devicevec import _container
from devicevec.embedding import (ConfigInvalid, EmptyVocabulary, TrainingConfig, build_vocab, cooccurrence_counts,
                                 export_text, load_model, pmi_oracle, save_model, sgns_pair_loss_and_grad,
                                 train_skipgram)
from devicevec.errors import DimensionMismatch, UnknownToken
from devicevec.pipeline.synthetic import two_cluster_corpus

from props import oracle_spearman, sgns_gradient_error

SMALL = TrainingConfig(dim=16, epochs=3, seed=3)


def test_zero_vectors_loss():
    loss, gv, gu, gn = sgns_pair_loss_and_grad(np.zeros(4), np.zeros(4), np.zeros((1, 4)))
    assert loss == pytest.approx(2 * math.log(2), abs=1e-12)
    assert gn.shape == (1, 4)


def test_large_positive_dot():
    v = np.full(8, 3.0)
    loss, *_ = sgns_pair_loss_and_grad(v, v, np.zeros((0, 8)))
    assert loss < 1e-20


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        sgns_pair_loss_and_grad(np.zeros(3), np.zeros(4), np.zeros((2, 3)))
    with pytest.raises(DimensionMismatch):
        sgns_pair_loss_and_grad(np.zeros(3), np.zeros(3), np.zeros((2, 4)))


def test_gradient_against_finite_differences(rng):
    assert max(sgns_gradient_error(rng) for _ in range(20)) < 1e-4


def test_vocab_order_and_min_count():
    vocab = build_vocab([["b", "a", "c"], ["a", "c", "d"]], min_count=2)
    assert vocab.tokens == ["a", "c"]
    with pytest.raises(EmptyVocabulary):
        build_vocab([["x"]], min_count=2)


def test_config_validation():
    with pytest.raises(ConfigInvalid):
        TrainingConfig(dim=0).validate()
    with pytest.raises(ConfigInvalid):
        TrainingConfig(final_lr=1.0, initial_lr=0.1).validate()


def test_single_token_vocabulary():
    model = train_skipgram([["a"], ["a"]], SMALL)
    assert np.isfinite(model.input_vectors).all()
    assert model.pair_counts == [0, 0, 0] and model.loss_trace == [0.0, 0.0, 0.0]


def test_deterministic_training_is_bitwise_reproducible():
    corpus = two_cluster_corpus(300, seed=1)
    a, b = io.BytesIO(), io.BytesIO()
    save_model(train_skipgram(corpus, SMALL), a)
    save_model(train_skipgram(corpus, SMALL), b)
    assert a.getvalue() == b.getvalue()


def test_parallel_mode_statistics():
    corpus = two_cluster_corpus(2000, seed=2)
    cfg = TrainingConfig(dim=20, epochs=5, seed=2, deterministic=False, workers=2)
    model = train_skipgram(corpus, cfg)
    assert np.isfinite(model.input_vectors).all()
    assert np.linalg.norm(model.input_vectors, axis=1).max() < 1e3
    assert sum(model.pair_counts) > 0


def test_loss_trend_non_increasing_after_epoch_two():
    model = train_skipgram(two_cluster_corpus(5000, seed=0), TrainingConfig(seed=0))
    trace = model.loss_trace
    # after epoch 2 no epoch may exceed the epoch-2 loss by more than 5%
    assert max(trace[2:]) <= trace[2] * 1.05
    assert all(b <= a * 1.05 for a, b in zip(trace[2:], trace[3:]))
    assert np.linalg.norm(model.input_vectors, axis=1).max() < 1e3


def test_oracle_correlation_one_seed():
    rho, _ = oracle_spearman(0)
    assert rho >= 0.5


def test_pmi_two_token_example():
    counts, vocab = cooccurrence_counts([["a", "b"]], 1)
    assert counts.sum() == 2
    pmi = pmi_oracle([["a", "b"]], 1)
    np.testing.assert_allclose(pmi, pmi.T)
    # two directed pairs, each marginal 1 -> log(1 * 2 / 1) = log 2
    assert pmi[vocab.index["a"], vocab.index["b"]] == pytest.approx(math.log(2))


def test_pmi_never_cooccurring_gets_minimum():
    pmi = pmi_oracle([["a", "b"], ["c", "d"]], 1)
    vocab = build_vocab([["a", "b"], ["c", "d"]])
    i, j = vocab.index["a"], vocab.index["c"]
    assert pmi[i, j] == pmi.min()


def test_pmi_independent_tokens_near_zero():
    rng = np.random.default_rng(0)
    toks = rng.choice(list("abcde"), size=100_000)
    corpus = [list(toks[i:i + 50]) for i in range(0, len(toks), 50)]
    pmi = pmi_oracle(corpus, 2)
    assert np.abs(pmi).max() < 0.1


def test_save_load_round_trip(tmp_path):
    model = train_skipgram(two_cluster_corpus(200, seed=4), SMALL)
    save_model(model, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    assert back.tokens == model.tokens and back.config == model.config
    assert back.input_vectors.tobytes() == model.input_vectors.tobytes()
    assert back.output_vectors.tobytes() == model.output_vectors.tobytes()
    assert back.loss_trace == model.loss_trace


def test_truncated_and_version(tmp_path):
    model = train_skipgram([["a", "b"]], SMALL)
    buf = io.BytesIO()
    save_model(model, buf)
    data = buf.getvalue()
    with pytest.raises(_container.CorruptModelFile):
        load_model(io.BytesIO(data[:-3]))
    with pytest.raises(_container.CorruptModelFile):
        load_model(io.BytesIO(data + b"x"))
    bumped = data[:4] + (99).to_bytes(2, "little") + data[6:]
    with pytest.raises(_container.VersionMismatch):
        load_model(io.BytesIO(bumped))
    with pytest.raises(_container.CorruptModelFile):
        load_model(io.BytesIO(b"NOPE" + data[4:]))


def test_vector_lookup_and_export():
    model = train_skipgram([["a", "b", "c"]], SMALL)
    with pytest.raises(UnknownToken):
        model.vector("zz")
    buf = io.StringIO()
    export_text(model, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 3 and [l.split()[0] for l in lines] == model.tokens
    assert all(len(l.split()) == 17 for l in lines)
