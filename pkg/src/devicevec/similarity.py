"""Nearest-neighbor queries and device-type identification.

Identification follows a stored-reference scheme: embed the new device,
compare it against one reference vector per known device type, and accept
the best type only if its similarity clears a threshold.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import BinaryIO, Mapping

import numpy as np

from . import _container
from ._container import CorruptModelFile
from .errors import DimensionMismatch, UnknownToken

__all__ = [
    "UnknownToken",
    "ZeroVector",
    "EmptyRegistry",
    "NeighborList",
    "DeviceTypeRegistry",
    "ClassificationResult",
    "DEFAULT_THRESHOLD",
    "cosine",
    "euclidean",
    "top_k_neighbors",
    "similarity_matrix",
    "identify_device_type",
    "embed_new_device",
    "save_registry",
    "load_registry",
]

DEFAULT_THRESHOLD = 0.3


class ZeroVector(ValueError):
    pass


class EmptyRegistry(ValueError):
    pass


def _dim_check(u, v):
    if u.shape != v.shape:
        raise DimensionMismatch(f"vectors of shape {u.shape} and {v.shape}")


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _dim_check(u, v)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def euclidean(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _dim_check(u, v)
    return float(np.linalg.norm(u - v))


@dataclass
class NeighborList:
    query: str
    neighbors: list[tuple[str, float]]

    def format(self) -> str:
        """One line in the ``D008 [('M017', 0.49...), ...]`` style."""
        return f"{self.query} [" + ", ".join(f"({t!r}, {s!r})" for t, s in self.neighbors) + "]"

    def lines(self) -> list[str]:
        return [f"{t} {s!r}" for t, s in self.neighbors]

    def to_json(self) -> dict:
        return {"query": self.query, "neighbors": [[t, s] for t, s in self.neighbors]}


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)


def similarity_matrix(model) -> np.ndarray:
    """V x V cosine matrix of the input vectors (exactly symmetric, unit diagonal)."""
    unit = _unit_rows(model.input_vectors)
    sim = unit @ unit.T
    sim = np.clip(0.5 * (sim + sim.T), -1.0, 1.0)
    np.fill_diagonal(sim, 1.0)
    return sim


def top_k_neighbors(model, token: str, k: int = 10, metric: str = "cosine") -> NeighborList:
    """The ``k`` most similar tokens to ``token``, excluding itself.

    ``metric="euclidean"`` ranks by ascending distance and reports the
    negated distance as the score. Ties break lexicographically.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if token not in model.vocab:
        raise UnknownToken(token)
    q = model.vocab.index[token]
    vecs = np.asarray(model.input_vectors, dtype=np.float64)
    if metric == "cosine":
        unit = _unit_rows(vecs)
        scores = np.clip(unit @ unit[q], -1.0, 1.0)
    elif metric == "euclidean":
        scores = -np.linalg.norm(vecs - vecs[q], axis=1)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    order = sorted((i for i in range(len(scores)) if i != q),
                   key=lambda i: (-scores[i], model.tokens[i]))
    return NeighborList(token, [(model.tokens[i], float(scores[i])) for i in order[:k]])


@dataclass
class DeviceTypeRegistry:
    """Reference embedding per device type."""

    entries: dict[str, np.ndarray]

    def __post_init__(self):
        self.entries = {label: np.asarray(v, dtype=np.float64) for label, v in self.entries.items()}
        dims = {v.shape for v in self.entries.values()}
        if len(dims) > 1:
            raise ValueError(f"registry vectors disagree in shape: {sorted(dims)}")
        for label, v in self.entries.items():
            if v.ndim != 1 or not np.isfinite(v).all() or not np.any(v):
                raise ValueError(f"reference vector for {label!r} must be finite and non-zero")

    @property
    def dim(self) -> int:
        return next(iter(self.entries.values())).shape[0] if self.entries else 0

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_model(cls, model, labels: Mapping[str, str], exclude=()) -> "DeviceTypeRegistry":
        """Centroid of member vectors per type label.

        Tokens without a label or listed in ``exclude`` are ignored.
        """
        groups: dict[str, list[np.ndarray]] = {}
        for token in model.tokens:
            if token in exclude or token not in labels:
                continue
            groups.setdefault(labels[token], []).append(np.asarray(model.vector(token), dtype=np.float64))
        return cls({label: np.mean(vs, axis=0) for label, vs in sorted(groups.items())})


@dataclass
class ClassificationResult:
    identified: bool
    device_type: str
    score: float
    threshold: float
    scores: dict[str, float] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "Identified" if self.identified else "Unknown"

    def format(self) -> str:
        if self.identified:
            return f"Identified type={self.device_type} score={self.score!r}"
        return f"Unknown best={self.device_type} score={self.score!r} threshold={self.threshold!r}"

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "device_type": self.device_type, "score": self.score,
                "threshold": self.threshold, "scores": dict(sorted(self.scores.items()))}


def identify_device_type(registry: DeviceTypeRegistry, new_embedding, threshold: float = DEFAULT_THRESHOLD
                         ) -> ClassificationResult:
    if not len(registry):
        raise EmptyRegistry("registry holds no device types")
    query = np.asarray(new_embedding, dtype=np.float64)
    scores = {label: cosine(query, ref) for label, ref in registry.entries.items()}
    best = min(scores, key=lambda label: (-scores[label], label))
    score = scores[best]
    return ClassificationResult(score >= threshold, best, score, threshold, scores)


def embed_new_device(corpus, config, new_token: str) -> np.ndarray:
    """Train from scratch on ``corpus`` and return ``new_token``'s vector."""
    from .embedding import train_skipgram, _sentences

    sentences = _sentences(corpus)
    if not any(new_token in s for s in sentences):
        raise UnknownToken(new_token)
    model = train_skipgram(sentences, config)
    return model.vector(new_token).astype(np.float64)


def save_registry(registry: DeviceTypeRegistry, sink: BinaryIO | str | os.PathLike) -> None:
    labels = list(registry.entries)
    matrix = np.array([registry.entries[l] for l in labels], dtype=np.float32).reshape(len(labels), registry.dim)
    _container.write(sink, {"kind": "registry", "labels": labels}, [matrix])


def load_registry(source: BinaryIO | str | os.PathLike) -> DeviceTypeRegistry:
    meta, matrices = _container.read(source)
    if meta.get("kind") != "registry" or len(matrices) != 1 or len(meta.get("labels", ())) != matrices[0].shape[0]:
        raise CorruptModelFile("container does not hold a device-type registry")
    return DeviceTypeRegistry(dict(zip(meta["labels"], matrices[0])))
