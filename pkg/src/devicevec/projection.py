"""PCA followed by exact t-SNE, and scatter-plot output (CSV / SVG)."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .event_log import SensorKind, infer_sensor_kind

__all__ = [
    "ProjectionConfig",
    "ProjectedPoint",
    "PCAResult",
    "TSNEResult",
    "DegenerateInput",
    "PerplexityTooLarge",
    "NonFiniteEncountered",
    "pca",
    "pca_reduce",
    "conditional_probabilities",
    "joint_probabilities",
    "kl_divergence",
    "kl_gradient",
    "tsne_embed",
    "tsne_from_affinities",
    "project_model",
    "emit_scatter",
]


class DegenerateInput(ValueError):
    pass


class PerplexityTooLarge(ValueError):
    pass


class NonFiniteEncountered(FloatingPointError):
    def __init__(self, iteration: int):
        super().__init__(f"non-finite values at t-SNE iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class ProjectionConfig:
    pca_dims: int = 30
    perplexity: float = 5.0
    iterations: int = 1000
    # a number, or "auto" for n_points / early_exaggeration (steadier on small vocabularies)
    learning_rate: float | str = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate != "auto" and not (isinstance(self.learning_rate, (int, float))
                                                 and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be positive or 'auto', got {self.learning_rate!r}")
        if self.pca_dims < 1 or self.perplexity <= 0:
            raise ValueError("pca_dims and perplexity must be positive")

    def step_size(self, n_points: int) -> float:
        if self.learning_rate == "auto":
            return max(n_points / self.early_exaggeration, 1.0)
        return float(self.learning_rate)


@dataclass
class ProjectedPoint:
    token: str
    x: float
    y: float
    kind: SensorKind | None = None

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates for {self.token!r}")
        if self.kind is None:
            self.kind = infer_sensor_kind(self.token.split("_")[0])


# -- PCA -------------------------------------------------------------------

@dataclass
class PCAResult:
    scores: np.ndarray
    components: np.ndarray  # dim x k, orthonormal columns
    explained_variance: np.ndarray
    mean: np.ndarray

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        total = self.explained_variance.sum()
        return self.explained_variance / total if total > 0 else self.explained_variance


def pca(matrix: np.ndarray, target_dims: int) -> PCAResult:
    """Principal components via eigen-decomposition of the covariance.

    Components come in descending-variance order; each is flipped so that
    its largest-magnitude loading is positive.
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DegenerateInput("need a 2-D matrix with at least two rows")
    n, d = X.shape
    if not 1 <= target_dims <= min(n, d):
        raise ValueError(f"target_dims must be in [1, {min(n, d)}], got {target_dims}")
    mean = X.mean(axis=0)
    Xc = X - mean
    if not np.any(Xc):
        raise DegenerateInput("all rows are identical")
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:target_dims]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order]
    pivot = np.argmax(np.abs(comps), axis=0)
    signs = np.sign(comps[pivot, np.arange(comps.shape[1])])
    signs[signs == 0] = 1.0
    comps = comps * signs
    return PCAResult(Xc @ comps, comps, evals, mean)


def pca_reduce(matrix: np.ndarray, target_dims: int) -> np.ndarray:
    return pca(matrix, target_dims).scores


# -- t-SNE -----------------------------------------------------------------

def _sq_distances(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X * X, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * X @ X.T
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, 0.0)


def _row_entropy(dist_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    # shift by the minimum distance so exp() cannot underflow to all zeros
    shifted = dist_row - dist_row.min()
    p = np.exp(-shifted * beta)
    total = p.sum()
    p /= total
    H = beta * np.sum(shifted * p) + np.log(total)
    return H, p


def conditional_probabilities(X: np.ndarray, perplexity: float, tol: float = 1e-5,
                              max_iter: int = 200) -> np.ndarray:
    """Row-stochastic p(j|i) with per-row Gaussian precision found by bisection.

    Each row's entropy (nats) is matched to ``log(perplexity)`` within ``tol``.
    """
    D = _sq_distances(np.asarray(X, dtype=np.float64))
    n = D.shape[0]
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        row = np.delete(D[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        H, p = _row_entropy(row, beta)
        for _ in range(max_iter):
            diff = H - target
            if abs(diff) < tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
            H, p = _row_entropy(row, beta)
        P[i, np.arange(n) != i] = p
    return P


def joint_probabilities(X: np.ndarray, perplexity: float) -> np.ndarray:
    P = conditional_probabilities(X, perplexity)
    P = (P + P.T) / (2.0 * P.shape[0])
    return P / P.sum()


def _student_t(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + _sq_distances(Y))
    np.fill_diagonal(num, 0.0)
    return num / num.sum(), num


def kl_divergence(Y: np.ndarray, P: np.ndarray) -> float:
    """KL(P || Q) for a 2-D (or any-D) layout ``Y``."""
    Q, _ = _student_t(np.asarray(Y, dtype=np.float64))
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], 1e-300))))


def kl_gradient(Y: np.ndarray, P: np.ndarray) -> np.ndarray:
    """``4 * sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)``."""
    Y = np.asarray(Y, dtype=np.float64)
    Q, num = _student_t(Y)
    W = (P - Q) * num
    return 4.0 * (np.diag(W.sum(axis=1)) - W) @ Y


@dataclass
class TSNEResult:
    coords: np.ndarray
    kl_trace: list[float] = field(default_factory=list)


def tsne_from_affinities(P: np.ndarray, config: ProjectionConfig = ProjectionConfig()) -> TSNEResult:
    """Gradient descent on KL(P || Q) from a seeded tiny Gaussian start.

    Uses momentum 0.5 then 0.8, per-coordinate adaptive gains, and early
    exaggeration of ``P`` for the first ``config.exaggeration_iters`` steps.
    The recorded trace is the un-exaggerated KL at every iteration.
    """
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    rng = np.random.default_rng(config.seed)
    Y = rng.normal(0.0, 1e-4, size=(n, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    trace = []
    lr = config.step_size(n)
    for it in range(config.iterations):
        exaggerating = it < config.exaggeration_iters
        momentum = 0.5 if it < 250 else 0.8
        grad = kl_gradient(Y, P * config.early_exaggeration if exaggerating else P)
        same_sign = np.sign(grad) == np.sign(update)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - lr * gains * grad
        Y = Y + update
        Y -= Y.mean(axis=0)
        kl = kl_divergence(Y, P)
        if not (np.isfinite(Y).all() and np.isfinite(kl)):
            raise NonFiniteEncountered(it)
        trace.append(kl)
    return TSNEResult(Y, trace)


def tsne_embed(matrix: np.ndarray, config: ProjectionConfig = ProjectionConfig()) -> TSNEResult:
    """Exact t-SNE of the rows of ``matrix`` into two dimensions."""
    X = np.asarray(matrix, dtype=np.float64)
    n = X.shape[0]
    if n < 4:
        raise ValueError("t-SNE needs at least 4 points")
    if not config.perplexity < (n - 1) / 3:
        raise PerplexityTooLarge(f"perplexity {config.perplexity} needs more than {3 * config.perplexity + 1:.0f} "
                                 f"points, have {n}")
    return tsne_from_affinities(joint_probabilities(X, config.perplexity), config)


def project_model(model, config: ProjectionConfig = ProjectionConfig()) -> tuple[list[ProjectedPoint], TSNEResult]:
    """PCA then t-SNE of a model's input vectors."""
    X = np.asarray(model.input_vectors, dtype=np.float64)
    k = min(config.pca_dims, X.shape[0], X.shape[1])
    result = tsne_embed(pca_reduce(X, k), config)
    points = [ProjectedPoint(t, float(x), float(y)) for t, (x, y) in zip(model.tokens, result.coords)]
    return points, result


# -- scatter output -----------------------------------------------------------

_PALETTE = {
    "Motion": "#1f77b4",
    "Door": "#d62728",
    "Item": "#2ca02c",
    "Shake": "#9467bd",
    "Fan": "#8c564b",
    "ExperimentalSwitch": "#e377c2",
}
_OTHER_COLOR = "#7f7f7f"


def _csv_text(points: Sequence[ProjectedPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["token", "kind", "x", "y"])
    for p in points:
        writer.writerow([p.token, str(p.kind), repr(p.x), repr(p.y)])
    return buf.getvalue()


def _svg_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _svg_text(points: Sequence[ProjectedPoint], width: int = 800, height: int = 800, margin: int = 60) -> str:
    xs = np.array([p.x for p in points])
    ys = np.array([p.y for p in points])
    span_x = xs.max() - xs.min() or 1.0
    span_y = ys.max() - ys.min() or 1.0
    sx = (width - 2 * margin) / span_x
    sy = (height - 2 * margin) / span_y
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" style="fill:#ffffff"/>',
    ]
    kinds = sorted({str(p.kind) for p in points})
    for row, kind in enumerate(kinds):
        color = _PALETTE.get(kind, _OTHER_COLOR)
        out.append(f'<circle cx="12" cy="{14 + 16 * row}" r="5" style="fill:{color}"/>')
        out.append(f'<text x="22" y="{18 + 16 * row}" style="font-family:sans-serif;font-size:11px">'
                   f'{_svg_escape(kind)}</text>')
    for p in points:
        cx = margin + (p.x - xs.min()) * sx
        cy = height - margin - (p.y - ys.min()) * sy
        color = _PALETTE.get(str(p.kind), _OTHER_COLOR)
        out.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="5" style="fill:{color};stroke:#000000;'
                   f'stroke-width:0.5"/>')
        out.append(f'<text x="{cx + 7:.3f}" y="{cy + 4:.3f}" style="font-family:sans-serif;font-size:10px">'
                   f'{_svg_escape(p.token)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_scatter(points: Sequence[ProjectedPoint], sink: TextIO | str | os.PathLike, format: str = "svg") -> None:
    """Write points as ``token,kind,x,y`` CSV or a self-contained SVG."""
    points = list(points)
    if not points:
        raise ValueError("no points to plot")
    fmt = format.lower()
    if fmt == "csv":
        text = _csv_text(points)
    elif fmt == "svg":
        text = _svg_text(points)
    else:
        raise ValueError(f"unknown plot format {format!r}")
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
