"""Command line entry point: ``devicevec <subcommand> ...``.

On failure a single ``devicevec: error: ...`` line goes to stderr and the
exit status is 1 (2 for usage errors).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import __version__
from .embedding import TrainingConfig, export_text, load_model, save_model, train_skipgram
from .event_log import FilterPolicy, SensorKind, extract_transitions, filter_events, read_log, write_events
from .pipeline.config import (PipelineConfig, add_config_flags, apply_overrides, load_config,
                              overrides_from_args)
from .pipeline.evaluation import evaluate, read_labels, write_labels
from .pipeline.runner import StageError, run_pipeline
from .pipeline.synthetic import generate_synthetic_log, ground_truth, three_room_home
from .projection import ProjectionConfig, emit_scatter, project_model
from .sessionizer import SessionizerConfig, corpus_stats, read_corpus, sessionize, write_corpus
from .similarity import (DEFAULT_THRESHOLD, DeviceTypeRegistry, embed_new_device, identify_device_type,
                         load_registry, save_registry, top_k_neighbors)

log = logging.getLogger("devicevec")


def _train_flags(p):
    d = TrainingConfig()
    p.add_argument("--dim", type=int, default=d.dim, help="embedding dimension")
    p.add_argument("--window", type=int, default=d.window, help="max context distance in tokens")
    p.add_argument("--negatives", type=int, default=d.negatives, help="negative samples per positive pair")
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--initial-lr", type=float, default=d.initial_lr)
    p.add_argument("--final-lr", type=float, default=d.final_lr)
    p.add_argument("--min-count", type=int, default=d.min_count)
    p.add_argument("--subsample-threshold", type=float, default=None)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--unigram-power", type=float, default=d.unigram_power)
    p.add_argument("--no-shrink-window", action="store_true", help="always use the full window")
    p.add_argument("--workers", type=int, default=1, help="> 1 trains in parallel (not bit-reproducible)")


def _train_config(args) -> TrainingConfig:
    return TrainingConfig(
        dim=args.dim, window=args.window, negatives=args.negatives, epochs=args.epochs,
        initial_lr=args.initial_lr, final_lr=args.final_lr, min_count=args.min_count,
        subsample_threshold=args.subsample_threshold, seed=args.seed, unigram_power=args.unigram_power,
        shrink_window=not args.no_shrink_window, deterministic=args.workers <= 1, workers=args.workers,
    ).validate()


def _projection_flags(p):
    d = ProjectionConfig()
    p.add_argument("--pca-dims", type=int, default=d.pca_dims)
    p.add_argument("--perplexity", type=float, default=d.perplexity)
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--learning-rate", type=lambda t: t if t == "auto" else float(t), default=d.learning_rate,
                   help="gradient step size, or 'auto' to scale it with the number of points")
    p.add_argument("--early-exaggeration", type=float, default=d.early_exaggeration)
    p.add_argument("--exaggeration-iters", type=int, default=d.exaggeration_iters)
    p.add_argument("--tsne-seed", type=int, default=d.seed)


def _kinds(text):
    if text.lower() == "all":
        return None
    return frozenset(SensorKind.parse(k) for k in text.split(",") if k)


def _ids(text):
    return frozenset(t for t in text.split(",") if t)


# -- subcommands --------------------------------------------------------------

def cmd_parse(args):
    events, report = read_log(args.input, "strict" if args.strict else "lenient")
    policy = FilterPolicy(_kinds(args.kinds), _ids(args.allow_ids), _ids(args.block_ids))
    events = filter_events(events, policy)
    if not args.keep_repeats:
        events = extract_transitions(events)
    write_events(events, args.output if args.output != "-" else sys.stdout)
    print(json.dumps({**report.as_dict(), "written": len(events)}, sort_keys=True), file=sys.stderr)


def cmd_sessionize(args):
    events, _ = read_log(args.events, "strict")
    config = SessionizerConfig(args.gap, args.min_len, args.collapse_repeats, args.scheme)
    corpus = sessionize(events, config)
    write_corpus(corpus, args.output if args.output != "-" else sys.stdout)
    print(json.dumps(dataclasses.asdict(corpus_stats(corpus)), sort_keys=True), file=sys.stderr)


def cmd_train(args):
    corpus = read_corpus(args.corpus)
    model = train_skipgram(corpus, _train_config(args))
    save_model(model, args.output)
    if args.export_text:
        export_text(model, args.export_text)
    print(json.dumps({"vocab": len(model.tokens), "loss_trace": model.loss_trace}), file=sys.stderr)


def cmd_neighbors(args):
    model = load_model(args.model)
    tokens = args.token or model.tokens
    reports = [top_k_neighbors(model, t, args.k, args.metric) for t in tokens]
    if args.json:
        print(json.dumps([r.to_json() for r in reports], indent=2))
        return
    for r in reports:
        if len(reports) == 1:
            print("\n".join(r.lines()))
        else:
            print(r.format())


def cmd_registry(args):
    model = load_model(args.model)
    labels = read_labels(args.labels)
    save_registry(DeviceTypeRegistry.from_model(model, labels, exclude=set(args.exclude or ())), args.output)


def cmd_identify(args):
    registry = load_registry(args.registry)
    corpus = read_corpus(args.corpus)
    vector = embed_new_device(corpus, _train_config(args), args.token)
    result = identify_device_type(registry, vector, args.threshold)
    print(json.dumps(result.to_json(), sort_keys=True) if args.json else result.format())


def cmd_plot(args):
    model = load_model(args.model)
    config = ProjectionConfig(args.pca_dims, args.perplexity, args.iterations, args.learning_rate,
                              args.early_exaggeration, args.exaggeration_iters, args.tsne_seed)
    points, _ = project_model(model, config)
    for fmt in (["svg", "csv"] if args.format == "both" else [args.format]):
        emit_scatter(points, f"{args.output}.{fmt}", fmt)


def cmd_synth(args):
    spec = three_room_home(seed=args.seed, days=args.days, residents=args.residents, noise_rate=args.noise_rate,
                           extra_kitchen=tuple(args.kitchen_device or ()),
                           noise_devices=tuple(args.noise_device or ()))
    text = "".join(line + "\n" for line in generate_synthetic_log(spec))
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if args.truth:
        write_labels(ground_truth(spec), args.truth)


def cmd_eval(args):
    model = load_model(args.model)
    report = evaluate(model, read_labels(args.truth), args.k)
    text = json.dumps(report.to_json(), indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_run(args):
    config = load_config(args.config) if args.config else PipelineConfig()
    overrides = overrides_from_args(args)
    if args.gap_sweep:
        overrides["run.gap_sweep"] = args.gap_sweep
    if args.output_dir:
        overrides["output.dir"] = args.output_dir
    for item in args.set or ():
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    config = apply_overrides(config, overrides)
    result = run_pipeline(config)
    dirs = [str(r.output_dir) for r in result.values()] if isinstance(result, dict) else [str(result.output_dir)]
    for d in dirs:
        print(d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="devicevec", description="Device embeddings from activity logs.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse, filter and reduce a log to state transitions")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-")
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")
    p.add_argument("--kinds", default="Motion,Door,Item,Shake,Fan,ExperimentalSwitch",
                   help="comma-separated sensor kinds, or 'all'")
    p.add_argument("--allow-ids", default="")
    p.add_argument("--block-ids", default="")
    p.add_argument("--keep-repeats", action="store_true", help="skip transition extraction")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("sessionize", help="split events into sessions")
    p.add_argument("--events", required=True)
    p.add_argument("--output", default="-")
    p.add_argument("--gap", type=float, default=60.0, help="session gap in seconds")
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--collapse-repeats", action="store_true")
    p.add_argument("--scheme", choices=["IdOnly", "IdAndState"], default="IdOnly")
    p.set_defaults(func=cmd_sessionize)

    p = sub.add_parser("train", help="train skip-gram embeddings on a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--export-text")
    _train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("neighbors", help="cosine nearest neighbors")
    p.add_argument("--model", required=True)
    p.add_argument("--token", action="append")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--metric", choices=["cosine", "euclidean"], default="cosine")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("registry", help="build a device-type registry from a model and labels")
    p.add_argument("--model", required=True)
    p.add_argument("--labels", required=True, help="'token label' per line")
    p.add_argument("--exclude", action="append")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_registry)

    p = sub.add_parser("identify", help="identify the type of a new device")
    p.add_argument("--registry", required=True)
    p.add_argument("--corpus", required=True, help="corpus containing the new device's sessions")
    p.add_argument("--token", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--json", action="store_true")
    _train_flags(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("plot", help="PCA + t-SNE scatter plot of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--output", required=True, help="path prefix; extension added per format")
    p.add_argument("--format", choices=["svg", "csv", "both"], default="both")
    _projection_flags(p)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", help="generate a synthetic three-room home log")
    p.add_argument("--output", default="-")
    p.add_argument("--truth", help="write 'device room' ground truth here")
    p.add_argument("--days", type=int, default=30)
    p.add_argument("--residents", type=int, default=1)
    p.add_argument("--noise-rate", type=float, default=0.5, help="spurious firings per hour")
    p.add_argument("--kitchen-device", action="append", help="extra device co-firing with kitchen visits")
    p.add_argument("--noise-device", action="append", help="device that fires only at random")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="embedding quality against ground-truth labels")
    p.add_argument("--model", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="full workflow from a config file")
    p.add_argument("--config")
    p.add_argument("--gap-sweep", help="comma-separated gaps, e.g. 10,60,600")
    p.add_argument("--output-dir")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    add_config_flags(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except StageError as exc:
        print(f"devicevec: error: stage={exc.stage} {type(exc.cause).__name__}: {exc.cause}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, FloatingPointError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"devicevec: error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
