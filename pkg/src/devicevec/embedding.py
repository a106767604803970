"""Skip-gram with negative sampling over device-token sessions.

Each session is a sentence and each device id a word. Training produces an
input matrix (the published device embeddings) and an output matrix of
context weights. :func:`pmi_oracle` is an independent brute-force
co-occurrence statistic used to sanity-check what training learns.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Sequence, TextIO

import numpy as np

from . import _container
from ._container import CorruptModelFile, VersionMismatch
from .errors import DimensionMismatch, UnknownToken
from ._sgns_kernel import epoch_parallel, epoch_serial, seed_states
from .sessionizer import Corpus

__all__ = [
    "Vocabulary",
    "TrainingConfig",
    "EmbeddingModel",
    "EmptyVocabulary",
    "ConfigInvalid",
    "DimensionMismatch",
    "CorruptModelFile",
    "VersionMismatch",
    "build_vocab",
    "train_skipgram",
    "sgns_pair_loss_and_grad",
    "cooccurrence_counts",
    "pmi_oracle",
    "save_model",
    "load_model",
    "export_text",
]

log = logging.getLogger(__name__)


class EmptyVocabulary(ValueError):
    pass


class ConfigInvalid(ValueError):
    pass


def _sentences(corpus) -> list[Sequence[str]]:
    if isinstance(corpus, Corpus):
        return corpus.sentences()
    return [tuple(s) for s in corpus]


@dataclass
class Vocabulary:
    tokens: list[str]
    counts: np.ndarray
    min_count: int = 1
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens) or len(self.tokens) != len(self.counts):
            raise ValueError("vocabulary tokens must be unique and match counts")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return (isinstance(other, Vocabulary) and self.tokens == other.tokens
                and np.array_equal(self.counts, other.counts) and self.min_count == other.min_count)


def build_vocab(corpus: Corpus | Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Count tokens; index by descending count, ties lexicographic."""
    counts = Counter()
    for sent in _sentences(corpus):
        counts.update(sent)
    kept = sorted(((t, c) for t, c in counts.items() if c >= min_count), key=lambda tc: (-tc[1], tc[0]))
    if not kept:
        raise EmptyVocabulary(f"no token reaches min_count={min_count}")
    return Vocabulary([t for t, _ in kept], np.array([c for _, c in kept], dtype=np.int64), min_count)


@dataclass(frozen=True)
class TrainingConfig:
    dim: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 15
    initial_lr: float = 0.025
    final_lr: float = 1e-4
    min_count: int = 1
    subsample_threshold: float | None = None
    seed: int = 1
    unigram_power: float = 0.75
    shrink_window: bool = True
    deterministic: bool = True
    workers: int = 1

    def validate(self) -> "TrainingConfig":
        problems = []
        for name in ("dim", "window", "negatives", "epochs", "min_count", "workers"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if not 0 < self.final_lr <= self.initial_lr:
            problems.append("need 0 < final_lr <= initial_lr")
        if self.subsample_threshold is not None and self.subsample_threshold < 0:
            problems.append("subsample_threshold must be non-negative")
        if self.unigram_power < 0:
            problems.append("unigram_power must be non-negative")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class EmbeddingModel:
    vocab: Vocabulary
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    config: TrainingConfig
    loss_trace: list[float] = field(default_factory=list)
    pair_counts: list[int] = field(default_factory=list)

    @property
    def tokens(self) -> list[str]:
        return self.vocab.tokens

    def __contains__(self, token):
        return token in self.vocab

    def vector(self, token: str) -> np.ndarray:
        try:
            return self.input_vectors[self.vocab.index[token]]
        except KeyError:
            raise UnknownToken(token) from None


def sgns_pair_loss_and_grad(center_vec, context_vec, negative_vecs):
    """Loss and exact gradients for one positive pair and its negatives.

    ``loss = -log s(u.v) - sum_k log s(-n_k.v)`` with ``v`` the center
    vector, ``u`` the context vector and ``n_k`` the rows of
    ``negative_vecs``.

    Returns
    -------
    loss : float
    grad_center, grad_context : ndarray, shape (dim,)
    grad_negatives : ndarray, shape (k, dim)
    """
    v = np.asarray(center_vec, dtype=np.float64)
    u = np.asarray(context_vec, dtype=np.float64)
    negs = np.atleast_2d(np.asarray(negative_vecs, dtype=np.float64))
    if negs.size == 0:
        negs = negs.reshape(0, v.shape[0])
    if v.ndim != 1 or u.shape != v.shape or negs.shape[1] != v.shape[0]:
        raise DimensionMismatch(f"shapes {v.shape}, {u.shape}, {negs.shape} do not agree")
    pos = u @ v
    neg = negs @ v
    loss = np.logaddexp(0.0, -pos) + np.logaddexp(0.0, neg).sum()
    # d/dx of -log s(x) is -(1 - s(x)); of -log s(-x) is s(x)
    g_pos = -_expit(-pos)
    g_neg = _expit(neg)
    grad_center = g_pos * u + g_neg @ negs
    grad_context = g_pos * v
    grad_negatives = np.outer(g_neg, v)
    return float(loss), grad_center, grad_context, grad_negatives


def _expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def _encode(sentences: list[Sequence[str]], vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    index = vocab.index
    ids = []
    offsets = [0]
    for sent in sentences:
        ids.extend(index[t] for t in sent if t in index)
        offsets.append(len(ids))
    return np.array(ids, dtype=np.int32), np.array(offsets, dtype=np.int64)


def _keep_probabilities(vocab: Vocabulary, threshold: float | None) -> np.ndarray:
    if not threshold:
        return np.ones(len(vocab))
    freq = vocab.counts / vocab.counts.sum()
    ratio = threshold / freq
    return np.minimum(1.0, np.sqrt(ratio) + ratio)


def _negative_cdf(vocab: Vocabulary, power: float) -> np.ndarray:
    weights = vocab.counts.astype(np.float64) ** power
    cdf = np.cumsum(weights / weights.sum())
    cdf[-1] = 1.0
    return cdf


def _chunk_bounds(offsets: np.ndarray, n_chunks: int) -> np.ndarray:
    # split sessions into chunks of roughly equal token mass
    n_sessions = len(offsets) - 1
    n_chunks = max(1, min(n_chunks, n_sessions))
    targets = np.linspace(0, offsets[-1], n_chunks + 1)
    bounds = np.searchsorted(offsets, targets[1:-1], side="left")
    return np.unique(np.concatenate(([0], bounds, [n_sessions]))).astype(np.int64)


def train_skipgram(corpus: Corpus | Iterable[Sequence[str]], config: TrainingConfig = TrainingConfig(),
                   vocab: Vocabulary | None = None) -> EmbeddingModel:
    """Train SGNS embeddings.

    With ``config.deterministic`` (the default) training runs single-threaded
    and is bit-reproducible for a fixed seed. Otherwise ``config.workers``
    chunks are trained concurrently with unsynchronized updates.
    """
    config.validate()
    sentences = _sentences(corpus)
    if vocab is None:
        vocab = build_vocab(sentences, config.min_count)
    ids, offsets = _encode(sentences, vocab)

    rng = np.random.default_rng(config.seed)
    bound = 0.5 / config.dim
    syn0 = rng.uniform(-bound, bound, size=(len(vocab), config.dim)).astype(np.float32)
    syn1 = np.zeros_like(syn0)

    parallel = not config.deterministic and config.workers > 1
    n_chunks = config.workers if parallel else 1
    bounds = _chunk_bounds(offsets, n_chunks) if len(offsets) > 1 else np.array([0, 0], dtype=np.int64)
    states = seed_states(config.seed, len(bounds) - 1)
    keep = _keep_probabilities(vocab, config.subsample_threshold)
    cdf = _negative_cdf(vocab, config.unigram_power)
    kernel = epoch_parallel if parallel else epoch_serial

    loss_trace, pair_counts = [], []
    span = config.initial_lr - config.final_lr
    for epoch in range(config.epochs):
        lr_a = config.initial_lr - span * epoch / config.epochs
        lr_b = config.initial_lr - span * (epoch + 1) / config.epochs
        losses = np.zeros(len(bounds) - 1)
        pairs = np.zeros(len(bounds) - 1, dtype=np.int64)
        kernel(ids, offsets, bounds, syn0, syn1, cdf, keep, config.window, config.negatives,
               config.shrink_window, lr_a, lr_b, states, losses, pairs)
        n_pairs = int(pairs.sum())
        loss_trace.append(float(losses.sum() / n_pairs) if n_pairs else 0.0)
        pair_counts.append(n_pairs)
        log.debug("epoch %d: %d pairs, mean loss %.5f", epoch, n_pairs, loss_trace[-1])

    if not (np.isfinite(syn0).all() and np.isfinite(syn1).all()):
        raise FloatingPointError("training diverged to non-finite vectors")
    return EmbeddingModel(vocab, syn0, syn1, config, loss_trace, pair_counts)


def cooccurrence_counts(corpus: Corpus | Iterable[Sequence[str]], window: int,
                        vocab: Vocabulary | None = None) -> tuple[np.ndarray, Vocabulary]:
    """Directed (center, context) pair counts within ``window`` positions.

    Plain nested loops on purpose: this is the reference the trained model
    is checked against.
    """
    sentences = _sentences(corpus)
    if vocab is None:
        vocab = build_vocab(sentences, 1)
    V = len(vocab)
    counts = np.zeros((V, V), dtype=np.int64)
    for sent in sentences:
        seq = [vocab.index[t] for t in sent if t in vocab.index]
        for i, a in enumerate(seq):
            for j in range(max(0, i - window), min(len(seq), i + window + 1)):
                if j != i:
                    counts[a, seq[j]] += 1
    return counts, vocab


def pmi_oracle(corpus: Corpus | Iterable[Sequence[str]], window: int,
               vocab: Vocabulary | None = None, shift: float = 0.0) -> np.ndarray:
    """Brute-force PMI matrix over vocabulary order.

    ``PMI(a, b) = log(count(a, b) * T / (count(a) * count(b))) - shift`` where
    ``T`` is the number of directed pairs and ``count(a)`` the number of pairs
    with ``a`` as center. Cells with no co-occurrence get the smallest finite
    value of the matrix.
    """
    counts, vocab = cooccurrence_counts(corpus, window, vocab)
    total = counts.sum()
    V = len(vocab)
    pmi = np.full((V, V), -np.inf)
    if total == 0:
        return np.zeros((V, V))
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    for a in range(V):
        for b in range(V):
            if counts[a, b] > 0:
                pmi[a, b] = math.log(counts[a, b] * total / (row[a] * col[b])) - shift
    finite = np.isfinite(pmi)
    pmi[~finite] = pmi[finite].min()
    return pmi


def save_model(model: EmbeddingModel, sink: BinaryIO | str | os.PathLike) -> None:
    meta = {
        "kind": "model",
        "config": model.config.to_dict(),
        "vocab": {"tokens": model.vocab.tokens, "counts": model.vocab.counts.tolist(),
                  "min_count": model.vocab.min_count},
        "loss_trace": model.loss_trace,
        "pair_counts": model.pair_counts,
    }
    _container.write(sink, meta, [model.input_vectors, model.output_vectors])


def load_model(source: BinaryIO | str | os.PathLike) -> EmbeddingModel:
    meta, matrices = _container.read(source)
    if meta.get("kind") != "model" or len(matrices) != 2:
        raise CorruptModelFile("container does not hold an embedding model")
    try:
        v = meta["vocab"]
        vocab = Vocabulary(v["tokens"], np.array(v["counts"], dtype=np.int64), v["min_count"])
        config = TrainingConfig(**meta["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelFile(f"bad metadata: {exc}") from None
    syn0, syn1 = matrices
    if syn0.shape != syn1.shape or syn0.shape[0] != len(vocab):
        raise CorruptModelFile("matrix shapes do not match vocabulary")
    return EmbeddingModel(vocab, syn0, syn1, config, list(meta["loss_trace"]), list(meta["pair_counts"]))


def export_text(model: EmbeddingModel, sink: TextIO | str | os.PathLike) -> None:
    """Plain ``token v1 ... vD`` rows, one per vocabulary entry."""
    lines = [f"{t} " + " ".join(repr(float(x)) for x in row)
             for t, row in zip(model.tokens, model.input_vectors)]
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
