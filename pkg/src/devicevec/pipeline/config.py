"""Flat ``section.key = value`` experiment manifests.

Example::

    input.paths = data/kyoto.txt
    session.gap = 60
    train.dim = 100
    train.seed = 7
    project.perplexity = 5

Every key can also be given on the command line as ``--section.key VALUE``
(see :func:`add_config_flags`).
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..embedding import TrainingConfig
from ..event_log import FilterPolicy, SensorKind
from ..projection import ProjectionConfig
from ..sessionizer import SessionizerConfig
from ..similarity import DEFAULT_THRESHOLD

__all__ = ["PipelineConfig", "ConfigError", "OUTPUT_ROOT_ENV", "KEYS", "parse_config", "load_config",
           "apply_overrides", "format_config", "add_config_flags", "overrides_from_args"]

OUTPUT_ROOT_ENV = "DEVICEVEC_OUTPUT_ROOT"


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    input_paths: list[str] = field(default_factory=list)
    parse_mode: str = "lenient"
    filter: FilterPolicy = FilterPolicy()
    session: SessionizerConfig = SessionizerConfig()
    train: TrainingConfig = TrainingConfig()
    projection: ProjectionConfig = ProjectionConfig()
    threshold: float = DEFAULT_THRESHOLD
    output_dir: str = "devicevec-out"
    deterministic: bool = True
    ground_truth: str | None = None
    eval_k: int = 3
    report_k: int = 10
    report_tokens: list[str] = field(default_factory=list)
    gap_sweep: list[float] = field(default_factory=list)
    plots: bool = True

    def resolved_output_dir(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "off") else float(text)


def _rate(text: str):
    return "auto" if text.strip().lower() == "auto" else float(text)


def _fmt_rate(value) -> str:
    return value if value == "auto" else repr(value)


def _kinds(text: str):
    if text.strip().lower() == "all":
        return None
    return frozenset(SensorKind.parse(k) for k in _list(text))


def _format_kinds(kinds) -> str:
    return "all" if kinds is None else ",".join(sorted(str(k) for k in kinds))


# key -> (parser, formatter, getter, setter)
def _sub(attr, name, parse, fmt=str):
    def get(cfg):
        return getattr(getattr(cfg, attr), name)

    def set_(cfg, value):
        setattr(cfg, attr, dataclasses.replace(getattr(cfg, attr), **{name: value}))

    return parse, fmt, get, set_


def _top(name, parse, fmt=str):
    return parse, fmt, (lambda cfg: getattr(cfg, name)), (lambda cfg, v: setattr(cfg, name, v))


def _fmt_list(values) -> str:
    return ",".join(str(v) for v in values)


def _fmt_opt(value) -> str:
    return "none" if value is None else repr(value)


KEYS = {
    "input.paths": _top("input_paths", _list, _fmt_list),
    "input.mode": _top("parse_mode", str),
    "filter.kinds": _sub("filter", "allowed_kinds", _kinds, _format_kinds),
    "filter.allow_ids": _sub("filter", "allowed_ids", lambda t: frozenset(_list(t)), lambda v: _fmt_list(sorted(v))),
    "filter.block_ids": _sub("filter", "blocked_ids", lambda t: frozenset(_list(t)), lambda v: _fmt_list(sorted(v))),
    "session.gap": _sub("session", "gap", float, repr),
    "session.min_len": _sub("session", "min_session_len", int),
    "session.collapse_repeats": _sub("session", "collapse_repeats", _bool),
    "session.scheme": _sub("session", "token_scheme", str),
    "train.dim": _sub("train", "dim", int),
    "train.window": _sub("train", "window", int),
    "train.negatives": _sub("train", "negatives", int),
    "train.epochs": _sub("train", "epochs", int),
    "train.initial_lr": _sub("train", "initial_lr", float, repr),
    "train.final_lr": _sub("train", "final_lr", float, repr),
    "train.min_count": _sub("train", "min_count", int),
    "train.subsample_threshold": _sub("train", "subsample_threshold", _optional_float, _fmt_opt),
    "train.seed": _sub("train", "seed", int),
    "train.unigram_power": _sub("train", "unigram_power", float, repr),
    "train.shrink_window": _sub("train", "shrink_window", _bool),
    "train.workers": _sub("train", "workers", int),
    "project.pca_dims": _sub("projection", "pca_dims", int),
    "project.perplexity": _sub("projection", "perplexity", float, repr),
    "project.iterations": _sub("projection", "iterations", int),
    "project.learning_rate": _sub("projection", "learning_rate", _rate, _fmt_rate),
    "project.early_exaggeration": _sub("projection", "early_exaggeration", float, repr),
    "project.exaggeration_iters": _sub("projection", "exaggeration_iters", int),
    "project.seed": _sub("projection", "seed", int),
    "project.enabled": _top("plots", _bool),
    "identify.threshold": _top("threshold", float, repr),
    "eval.ground_truth": _top("ground_truth", lambda t: t.strip() or None, lambda v: v or ""),
    "eval.k": _top("eval_k", int),
    "report.k": _top("report_k", int),
    "report.tokens": _top("report_tokens", _list, _fmt_list),
    "output.dir": _top("output_dir", str),
    "run.deterministic": _top("deterministic", _bool),
    "run.gap_sweep": _top("gap_sweep", lambda t: [float(x) for x in _list(t)], lambda v: _fmt_list(repr(x) for x in v)),
}


def apply_overrides(config: PipelineConfig, items: dict[str, str]) -> PipelineConfig:
    for key, value in items.items():
        if key not in KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        parse, _, _, set_ = KEYS[key]
        try:
            set_(config, parse(value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    config.train = dataclasses.replace(config.train, deterministic=config.deterministic)
    return config


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    items = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        items[key.strip()] = value.strip()
    return apply_overrides(base or PipelineConfig(), items)


def load_config(path) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(config: PipelineConfig) -> str:
    """Canonical manifest text; ``parse_config(format_config(c))`` reproduces ``c``."""
    lines = []
    for key, (_, fmt, get, _) in KEYS.items():
        lines.append(f"{key} = {fmt(get(config))}")
    return "\n".join(lines) + "\n"


def add_config_flags(parser) -> None:
    group = parser.add_argument_group("config keys (override the config file)")
    for key in KEYS:
        group.add_argument(f"--{key}", dest=f"cfg:{key}", metavar="VALUE", default=None)


def overrides_from_args(args) -> dict[str, str]:
    return {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:") and v is not None}
