"""Reading and cleaning smart-home activity logs.

A log line is whitespace separated::

    2009-02-06 17:17:36.535295 M046 ON [annotation ...]

Events keep the original time text so that re-serializing a parsed event
reproduces its first four fields exactly.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, TextIO

__all__ = [
    "SensorEvent",
    "SensorKind",
    "FilterPolicy",
    "ParseReport",
    "MalformedLine",
    "LogReadError",
    "parse_line",
    "parse_log",
    "read_log",
    "format_event",
    "write_events",
    "filter_events",
    "extract_transitions",
    "infer_sensor_kind",
]


class MalformedLine(ValueError):
    """A log line that does not follow the ``date time sensor state`` grammar."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class LogReadError(OSError):
    """The log source itself could not be read."""


@dataclass(frozen=True)
class SensorEvent:
    timestamp: datetime
    sensor_id: str
    state: str
    annotation: str | None = None
    # original "date time" text, used for byte-exact re-serialization
    time_text: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        if not self.sensor_id or any(c.isspace() for c in self.sensor_id):
            raise ValueError(f"invalid sensor id {self.sensor_id!r}")
        if not self.state or any(c.isspace() for c in self.state):
            raise ValueError(f"invalid state {self.state!r}")


@dataclass(frozen=True)
class SensorKind:
    """Sensor family inferred from the alphabetic prefix of its id.

    The six named kinds are module constants (``MOTION``, ``DOOR`` ...);
    anything else is ``SensorKind.other(prefix)``.
    """

    name: str
    prefix: str = ""

    @classmethod
    def other(cls, prefix: str) -> "SensorKind":
        return cls("Other", prefix)

    @classmethod
    def parse(cls, text: str) -> "SensorKind":
        """Inverse of ``str(kind)``: ``"Door"`` or ``"Other(MA)"``."""
        text = text.strip()
        if text.startswith("Other(") and text.endswith(")"):
            return cls.other(text[6:-1])
        for kind in NAMED_KINDS:
            if kind.name.lower() == text.lower():
                return kind
        raise ValueError(f"unknown sensor kind {text!r}")

    def __str__(self):
        return f"Other({self.prefix})" if self.name == "Other" else self.name


MOTION = SensorKind("Motion")
DOOR = SensorKind("Door")
ITEM = SensorKind("Item")
SHAKE = SensorKind("Shake")
FAN = SensorKind("Fan")
SWITCH = SensorKind("ExperimentalSwitch")
NAMED_KINDS = (MOTION, DOOR, ITEM, SHAKE, FAN, SWITCH)

_PREFIX_KINDS = {"M": MOTION, "D": DOOR, "I": ITEM, "S": SHAKE, "F": FAN, "E": SWITCH}


def infer_sensor_kind(sensor_id: str) -> SensorKind:
    """Kind from the longest alphabetic prefix of ``sensor_id``.

    >>> str(infer_sensor_kind("M016")), str(infer_sensor_kind("MA202"))
    ('Motion', 'Other(MA)')
    """
    if not sensor_id:
        raise ValueError("empty sensor id")
    n = 0
    while n < len(sensor_id) and sensor_id[n].isalpha():
        n += 1
    prefix = sensor_id[:n]
    return _PREFIX_KINDS.get(prefix, SensorKind.other(prefix))


@dataclass(frozen=True)
class FilterPolicy:
    """Which sensors survive filtering.

    ``allowed_kinds=None`` admits every kind. Explicitly allowed ids pass
    regardless of kind; blocked ids are removed from the kind-based set.
    """

    allowed_kinds: frozenset[SensorKind] | None = frozenset(NAMED_KINDS)
    allowed_ids: frozenset[str] = frozenset()
    blocked_ids: frozenset[str] = frozenset()

    @classmethod
    def allow_all(cls) -> "FilterPolicy":
        return cls(allowed_kinds=None)

    @classmethod
    def allow_nothing(cls) -> "FilterPolicy":
        return cls(allowed_kinds=frozenset())

    def passes(self, sensor_id: str) -> bool:
        if sensor_id in self.allowed_ids:
            return True
        if sensor_id in self.blocked_ids:
            return False
        if self.allowed_kinds is None:
            return True
        return infer_sensor_kind(sensor_id) in self.allowed_kinds


@dataclass
class ParseReport:
    total: int = 0
    parsed: int = 0
    skipped: int = 0
    malformed: int = 0
    errors: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"total": self.total, "parsed": self.parsed,
                "skipped": self.skipped, "malformed": self.malformed}


def _parse_stamp(date_text: str, time_text: str) -> datetime:
    # hand-rolled: fromisoformat (3.10) rejects fractions that are not 3 or 6 digits
    y, mo, d = date_text.split("-")
    clock, _, frac = time_text.partition(".")
    h, mi, s = clock.split(":")
    if frac and (not frac.isdigit() or len(frac) > 6):
        raise ValueError(f"bad fractional seconds {frac!r}")
    micro = int(frac.ljust(6, "0")) if frac else 0
    return datetime(int(y), int(mo), int(d), int(h), int(mi), int(s), micro)


def parse_line(line: str, line_no: int = 0) -> SensorEvent | None:
    """Parse one record; ``None`` for blank and ``#`` comment lines."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    parts = stripped.split(None, 4)
    if len(parts) < 4:
        raise MalformedLine(line_no, f"expected at least 4 fields, got {len(parts)}")
    date_text, time_text, sensor_id, state = parts[:4]
    try:
        stamp = _parse_stamp(date_text, time_text)
    except ValueError as exc:
        raise MalformedLine(line_no, f"unparseable timestamp {date_text} {time_text}: {exc}") from None
    annotation = parts[4] if len(parts) == 5 else None
    return SensorEvent(stamp, sensor_id, state, annotation, f"{date_text} {time_text}")


def parse_log(source: Iterable[str], mode: str = "lenient") -> tuple[list[SensorEvent], ParseReport]:
    """Parse a stream of lines in file order.

    In ``strict`` mode the first malformed line raises; in ``lenient`` mode it
    is counted in the report and skipped.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"mode must be 'strict' or 'lenient', not {mode!r}")
    report = ParseReport()
    events = []
    try:
        for line_no, line in enumerate(source, start=1):
            report.total += 1
            try:
                event = parse_line(line, line_no)
            except MalformedLine as exc:
                if mode == "strict":
                    raise
                report.malformed += 1
                if len(report.errors) < 20:
                    report.errors.append(str(exc))
                continue
            if event is None:
                report.skipped += 1
            else:
                report.parsed += 1
                events.append(event)
    except (OSError, UnicodeDecodeError) as exc:
        raise LogReadError(f"failed reading log: {exc}") from exc
    return events, report


def read_log(path: str | os.PathLike, mode: str = "lenient") -> tuple[list[SensorEvent], ParseReport]:
    try:
        fh = open(path, encoding="utf-8", newline=None)
    except OSError as exc:
        raise LogReadError(f"cannot open {path}: {exc}") from exc
    with fh:
        return parse_log(fh, mode)


def format_event(event: SensorEvent) -> str:
    stamp = event.time_text or event.timestamp.strftime("%Y-%m-%d %H:%M:%S.%f")
    line = f"{stamp} {event.sensor_id} {event.state}"
    if event.annotation:
        line += f" {event.annotation}"
    return line


def write_events(events: Iterable[SensorEvent], sink: TextIO | str | os.PathLike) -> None:
    """Write events in the same text format ``parse_log`` reads."""
    if isinstance(sink, io.IOBase) or hasattr(sink, "write"):
        for event in events:
            sink.write(format_event(event) + "\n")
        return
    with open(sink, "w", encoding="utf-8", newline="\n") as fh:
        write_events(events, fh)


def filter_events(events: Iterable[SensorEvent], policy: FilterPolicy) -> list[SensorEvent]:
    cache: dict[str, bool] = {}
    out = []
    for event in events:
        keep = cache.get(event.sensor_id)
        if keep is None:
            keep = cache[event.sensor_id] = policy.passes(event.sensor_id)
        if keep:
            out.append(event)
    return out


def extract_transitions(events: Iterable[SensorEvent]) -> list[SensorEvent]:
    """Keep only events where a sensor's state changes.

    Deduplication is per sensor: an event survives if it is the sensor's
    first event or its state differs from that sensor's last kept state.
    """
    last: dict[str, str] = {}
    out = []
    for event in events:
        if last.get(event.sensor_id) != event.state:
            last[event.sensor_id] = event.state
            out.append(event)
    return out
