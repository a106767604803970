"""Gap-based segmentation of an event stream into token sessions.

A new session opens whenever the time since the previous event (of any
sensor) is strictly greater than the configured gap. Inside a session only
the order of firings is kept.
"""

from __future__ import annotations

import hashlib
import os
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Sequence, TextIO

import numpy as np

from .event_log import SensorEvent, format_event

__all__ = [
    "ID_ONLY",
    "ID_AND_STATE",
    "CANONICAL_GAPS",
    "SessionizerConfig",
    "Session",
    "Corpus",
    "CorpusStats",
    "CorruptCorpusFile",
    "session_boundaries",
    "sessionize",
    "corpus_stats",
    "write_corpus",
    "read_corpus",
]

ID_ONLY = "IdOnly"
ID_AND_STATE = "IdAndState"

# default gap sweep, seconds
CANONICAL_GAPS = (10.0, 60.0, 600.0)


class CorruptCorpusFile(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"corpus line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass(frozen=True)
class SessionizerConfig:
    gap: float = 60.0
    min_session_len: int = 2
    collapse_repeats: bool = False
    token_scheme: str = ID_ONLY

    def __post_init__(self):
        if not self.gap > 0:
            raise ValueError(f"gap must be > 0, got {self.gap}")
        if self.min_session_len < 1:
            raise ValueError(f"min_session_len must be >= 1, got {self.min_session_len}")
        if self.token_scheme not in (ID_ONLY, ID_AND_STATE):
            raise ValueError(f"unknown token scheme {self.token_scheme!r}")


@dataclass(frozen=True)
class Session:
    tokens: tuple[str, ...]
    # not persisted in corpus files, hence excluded from equality
    start_time: datetime | None = field(default=None, compare=False)
    end_time: datetime | None = field(default=None, compare=False)

    def __len__(self):
        return len(self.tokens)


@dataclass
class Corpus:
    sessions: list[Session]
    config: SessionizerConfig
    digest: str = ""

    def sentences(self) -> list[tuple[str, ...]]:
        return [s.tokens for s in self.sessions]

    def __len__(self):
        return len(self.sessions)


@dataclass
class CorpusStats:
    session_count: int
    token_count: int
    vocab_size: int
    length_histogram: dict[int, int]


def _token(event: SensorEvent, scheme: str) -> str:
    if scheme == ID_ONLY:
        return event.sensor_id
    return f"{event.sensor_id}_{event.state}"


def _micros(events: Sequence[SensorEvent]) -> np.ndarray:
    return np.array([e.timestamp for e in events], dtype="datetime64[us]").astype(np.int64)


def session_boundaries(times_us: np.ndarray, gap: float) -> np.ndarray:
    """Start indices of each session for integer-microsecond timestamps.

    Index 0 is always a boundary when the input is non-empty.
    """
    times_us = np.asarray(times_us, dtype=np.int64)
    if times_us.size == 0:
        return np.zeros(0, dtype=np.int64)
    gap_us = int(round(gap * 1e6))
    breaks = np.flatnonzero(np.diff(times_us) > gap_us) + 1
    return np.concatenate(([0], breaks)).astype(np.int64)


def input_digest(events: Iterable[SensorEvent]) -> str:
    h = hashlib.sha256()
    for event in events:
        h.update(format_event(event).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def sessionize(events: Sequence[SensorEvent], config: SessionizerConfig = SessionizerConfig()) -> Corpus:
    """Split time-ordered events into sessions.

    Sessions shorter than ``config.min_session_len`` (after optional
    collapsing of immediate repeats) are dropped. Empty input gives an empty
    corpus.
    """
    events = list(events)
    digest = input_digest(events)
    if not events:
        return Corpus([], config, digest)
    times = _micros(events)
    if np.any(np.diff(times) < 0):
        raise ValueError("events are not time-ordered")
    starts = session_boundaries(times, config.gap)
    ends = np.append(starts[1:], len(events))
    sessions = []
    for lo, hi in zip(starts.tolist(), ends.tolist()):
        tokens = [_token(e, config.token_scheme) for e in events[lo:hi]]
        if config.collapse_repeats:
            tokens = [t for i, t in enumerate(tokens) if i == 0 or t != tokens[i - 1]]
        if len(tokens) < config.min_session_len:
            continue
        sessions.append(Session(tuple(tokens), events[lo].timestamp, events[hi - 1].timestamp))
    return Corpus(sessions, config, digest)


def corpus_stats(corpus: Corpus | Iterable[Sequence[str]]) -> CorpusStats:
    sentences = corpus.sentences() if isinstance(corpus, Corpus) else list(corpus)
    vocab = set()
    hist = Counter()
    tokens = 0
    for sent in sentences:
        vocab.update(sent)
        hist[len(sent)] += 1
        tokens += len(sent)
    return CorpusStats(len(sentences), tokens, len(vocab), dict(sorted(hist.items())))


def _format_corpus(corpus: Corpus) -> str:
    cfg = corpus.config
    lines = [
        f"#gap={cfg.gap!r}",
        f"#scheme={cfg.token_scheme}",
        f"#digest={corpus.digest}",
        f"#min_session_len={cfg.min_session_len}",
        f"#collapse_repeats={int(cfg.collapse_repeats)}",
        f"#sessions={len(corpus.sessions)}",
    ]
    lines.extend(" ".join(s.tokens) for s in corpus.sessions)
    lines.append("#end")
    return "\n".join(lines) + "\n"


def write_corpus(corpus: Corpus, sink: TextIO | str | os.PathLike) -> None:
    text = _format_corpus(corpus)
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


_HEADER_KEYS = ("gap", "scheme", "digest", "min_session_len", "collapse_repeats", "sessions")


def read_corpus(source: TextIO | str | os.PathLike) -> Corpus:
    """Read a file written by :func:`write_corpus`.

    Raises :class:`CorruptCorpusFile` on missing headers, a session count that
    does not match, or a missing ``#end`` trailer (truncation).
    """
    if hasattr(source, "read"):
        lines = source.read().split("\n")
    else:
        with open(source, encoding="utf-8", newline="") as fh:
            lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    header = {}
    i = 0
    while i < len(lines) and len(header) < len(_HEADER_KEYS):
        key, sep, value = lines[i].partition("=")
        if not key.startswith("#") or not sep or key[1:] != _HEADER_KEYS[len(header)]:
            raise CorruptCorpusFile(i + 1, f"expected header #{_HEADER_KEYS[len(header)]}=")
        header[key[1:]] = value
        i += 1
    if len(header) < len(_HEADER_KEYS):
        raise CorruptCorpusFile(i + 1, "truncated header")
    try:
        config = SessionizerConfig(
            gap=float(header["gap"]),
            min_session_len=int(header["min_session_len"]),
            collapse_repeats=bool(int(header["collapse_repeats"])),
            token_scheme=header["scheme"],
        )
        n_sessions = int(header["sessions"])
    except ValueError as exc:
        raise CorruptCorpusFile(i, f"bad header value: {exc}") from None

    body = lines[i:]
    if not body or body[-1] != "#end":
        raise CorruptCorpusFile(len(lines), "missing #end trailer (truncated file?)")
    body = body[:-1]
    if len(body) != n_sessions:
        raise CorruptCorpusFile(len(lines), f"expected {n_sessions} sessions, found {len(body)}")
    sessions = []
    for offset, line in enumerate(body):
        tokens = tuple(line.split(" "))
        if not line or any(not t for t in tokens):
            raise CorruptCorpusFile(i + offset + 1, "empty token or session")
        sessions.append(Session(tokens))
    return Corpus(sessions, config, header["digest"])
