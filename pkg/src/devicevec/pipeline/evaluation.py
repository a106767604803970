"""Embedding-quality metrics against a device -> room (or type) labeling.

These metrics are defined here, not taken from any published result:
mean cosine of same-label pairs, mean cosine of cross-label pairs, their
difference (margin), and neighbor-recall@k.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import UnknownToken
from ..similarity import similarity_matrix

__all__ = ["EvalReport", "UnlabeledToken", "evaluate", "evaluate_matrix", "label_of", "read_labels",
           "write_labels"]


class UnlabeledToken(UnknownToken):
    def __str__(self):
        return f"no ground-truth label for token {self.args[0]!r}"


@dataclass
class EvalReport:
    intra_mean: float
    inter_mean: float
    margin: float
    k: int
    recall_at_k: dict[str, float]
    mean_recall: float
    sweep: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


def label_of(token: str, labels: Mapping[str, str]) -> str:
    """Label lookup; ``ID_STATE`` tokens fall back to their device id."""
    if token in labels:
        return labels[token]
    base = token.split("_", 1)[0]
    if base in labels:
        return labels[base]
    raise UnlabeledToken(token)


def evaluate_matrix(sim: np.ndarray, tokens: Sequence[str], labels: Mapping[str, str], k: int = 3) -> EvalReport:
    if k < 1:
        raise ValueError("k must be >= 1")
    lab = np.array([label_of(t, labels) for t in tokens])
    n = len(tokens)
    same = lab[:, None] == lab[None, :]
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    intra = sim[same & upper]
    inter = sim[~same & upper]
    intra_mean = float(intra.mean()) if intra.size else float("nan")
    inter_mean = float(inter.mean()) if inter.size else float("nan")
    recall = {}
    kk = min(k, n - 1)
    for i, tok in enumerate(tokens):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (-sim[i, j], tokens[j]))[:kk]
        recall[tok] = sum(lab[j] == lab[i] for j in order) / kk if kk else 0.0
    return EvalReport(intra_mean, inter_mean, intra_mean - inter_mean, k, recall,
                      float(np.mean(list(recall.values()))) if recall else 0.0)


def evaluate(model, ground_truth: Mapping[str, str], k: int = 3) -> EvalReport:
    """Intra/inter-label cosine means, margin and neighbor-recall@k."""
    return evaluate_matrix(similarity_matrix(model), model.tokens, ground_truth, k)


def read_labels(path) -> dict[str, str]:
    """``token label`` per line; ``#`` comments allowed."""
    labels = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'token label'")
            labels[parts[0]] = parts[1]
    return labels


def write_labels(labels: Mapping[str, str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for token in sorted(labels):
            fh.write(f"{token} {labels[token]}\n")
