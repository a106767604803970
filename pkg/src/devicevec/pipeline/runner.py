"""End-to-end workflow: parse, filter, transitions, sessionize, train,
similarity reports, PCA + t-SNE plots and (optionally) evaluation.

Every intermediate artifact is written to the output directory so each
stage can be rerun on its own.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..embedding import EmbeddingModel, export_text, save_model, train_skipgram
from ..event_log import extract_transitions, filter_events, infer_sensor_kind, read_log, write_events
from ..projection import ProjectionConfig, emit_scatter, project_model
from ..sessionizer import Corpus, corpus_stats, sessionize, write_corpus
from ..similarity import DeviceTypeRegistry, NeighborList, save_registry, similarity_matrix, top_k_neighbors
from .config import PipelineConfig, format_config
from .evaluation import EvalReport, evaluate, label_of, read_labels

__all__ = ["EmptyInput", "StageError", "PipelineResult", "run_pipeline", "run_single", "gap_dirname"]

log = logging.getLogger(__name__)


class EmptyInput(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    output_dir: Path
    corpus: Corpus
    model: EmbeddingModel
    neighbors: list[NeighborList]
    points: list = field(default_factory=list)
    eval_report: EvalReport | None = None


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_similarity(model: EmbeddingModel, path: Path) -> np.ndarray:
    sim = similarity_matrix(model)
    rows = ["token," + ",".join(model.tokens)]
    for tok, row in zip(model.tokens, sim):
        rows.append(tok + "," + ",".join(repr(float(x)) for x in row))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return sim


def _fit_projection(config: ProjectionConfig, n_points: int) -> ProjectionConfig | None:
    # tiny vocabularies cannot support the configured perplexity
    if n_points < 4:
        return None
    limit = (n_points - 1) / 3
    if config.perplexity < limit:
        return config
    reduced = max(1.0, round(limit - 0.01, 2))
    if reduced >= limit:
        return None
    log.warning("perplexity %.2f too large for %d points; using %.2f", config.perplexity, n_points, reduced)
    return dataclasses.replace(config, perplexity=reduced)


def run_single(config: PipelineConfig, out: Path, events=None, report=None) -> PipelineResult:
    """Run every stage for one session gap into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(format_config(config), encoding="utf-8")

    if events is None:
        events, report = _load_events(config)
    _dump_json(report, out / "parse_report.json")

    with _Stage("filter"):
        kept = extract_transitions(filter_events(events, config.filter))
        write_events(kept, out / "events.filtered.log")

    with _Stage("sessionize"):
        corpus = sessionize(kept, config.session)
        if not corpus.sessions:
            raise EmptyInput(f"no sessions of length >= {config.session.min_session_len} "
                             f"({len(kept)} events after filtering)")
        write_corpus(corpus, out / "corpus.txt")
        stats = corpus_stats(corpus)
        _dump_json(dataclasses.asdict(stats), out / "corpus_stats.json")

    with _Stage("train"):
        train_cfg = dataclasses.replace(config.train, deterministic=config.deterministic)
        model = train_skipgram(corpus, train_cfg)
        save_model(model, out / "model.bin")
        export_text(model, out / "vectors.txt")

    with _Stage("similarity"):
        _write_similarity(model, out / "similarity.csv")
        queries = config.report_tokens or model.tokens
        neighbors = [top_k_neighbors(model, t, config.report_k) for t in queries]
        (out / "neighbors.txt").write_text("".join(n.format() + "\n" for n in neighbors), encoding="utf-8")
        _dump_json([n.to_json() for n in neighbors], out / "neighbors.json")

    points = []
    if config.plots:
        with _Stage("project"):
            proj_cfg = _fit_projection(config.projection, len(model.tokens))
            if proj_cfg is None:
                log.warning("skipping plots: only %d tokens", len(model.tokens))
            else:
                points, tsne = project_model(model, proj_cfg)
                emit_scatter(points, out / "tsne.csv", "csv")
                emit_scatter(points, out / "tsne.svg", "svg")
                _dump_json({"perplexity": proj_cfg.perplexity, "kl_trace": tsne.kl_trace}, out / "tsne_kl.json")

    eval_report = None
    with _Stage("eval"):
        if config.ground_truth:
            labels = read_labels(config.ground_truth)
            eval_report = evaluate(model, labels, config.eval_k)
            _dump_json(eval_report.to_json(), out / "eval.json")
            types = {t: label_of(t, labels) for t in model.tokens}
        else:
            types = {t: str(infer_sensor_kind(t.split("_", 1)[0])) for t in model.tokens}
        save_registry(DeviceTypeRegistry.from_model(model, types), out / "registry.bin")

    return PipelineResult(out, corpus, model, neighbors, points, eval_report)


def _load_events(config: PipelineConfig):
    with _Stage("parse"):
        if not config.input_paths:
            raise EmptyInput("no input paths configured")
        events, totals = [], {"total": 0, "parsed": 0, "skipped": 0, "malformed": 0}
        for path in config.input_paths:
            ev, rep = read_log(path, config.parse_mode)
            events.extend(ev)
            for k, v in rep.as_dict().items():
                totals[k] += v
        # several files: merge by time, stable for ties
        if len(config.input_paths) > 1:
            events.sort(key=lambda e: e.timestamp)
    return events, totals


def gap_dirname(gap: float) -> str:
    return f"gap_{gap:g}"


def run_pipeline(config: PipelineConfig) -> PipelineResult | dict[float, PipelineResult]:
    """Run the workflow; with ``config.gap_sweep`` one subdirectory per gap."""
    out = config.resolved_output_dir()
    if not config.gap_sweep:
        return run_single(config, out)
    events, report = _load_events(config)
    results = {}
    sweep = []
    for gap in config.gap_sweep:
        cfg = dataclasses.replace(config, session=dataclasses.replace(config.session, gap=gap), gap_sweep=[])
        res = run_single(cfg, out / gap_dirname(gap), events, report)
        results[gap] = res
        row = {"gap": gap, "sessions": len(res.corpus.sessions), "vocab": len(res.model.tokens)}
        if res.eval_report is not None:
            row.update(intra_mean=res.eval_report.intra_mean, inter_mean=res.eval_report.inter_mean,
                       margin=res.eval_report.margin, mean_recall=res.eval_report.mean_recall)
        sweep.append(row)
    _dump_json(sweep, out / "sweep.json")
    for res in results.values():
        if res.eval_report is not None:
            res.eval_report.sweep = sweep
    return results
