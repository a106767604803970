"""Discrete-event simulator for a small instrumented home.

Residents start routines at exponentially distributed intervals during
their waking hours. Entering a room triggers its motion sensors repeatedly
for the dwell time and fires the room's other devices with a per-device
probability; every activation is an ON/OPEN followed by OFF/CLOSE. Noise
firings land uniformly at random on random devices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from ..event_log import DOOR, MOTION, infer_sensor_kind

__all__ = [
    "Room",
    "Routine",
    "SyntheticHomeSpec",
    "SpecInvalid",
    "generate_events",
    "generate_synthetic_log",
    "ground_truth",
    "three_room_home",
    "two_cluster_corpus",
]


class SpecInvalid(ValueError):
    pass


@dataclass(frozen=True)
class Room:
    name: str
    devices: tuple[str, ...]


@dataclass(frozen=True)
class Routine:
    rooms: tuple[str, ...]
    dwell: tuple[float, float] = (60.0, 240.0)  # uniform dwell seconds per room
    fire_prob: dict[str, float] = field(default_factory=dict, hash=False)
    weight: float = 1.0


@dataclass
class SyntheticHomeSpec:
    rooms: list[Room]
    routines: list[Routine]
    days: int = 30
    residents: int = 1
    noise_rate: float = 0.0  # spurious firings per hour, whole home
    seed: int = 0
    mean_interval: float = 1800.0  # seconds between routine starts, per resident
    waking_hours: tuple[float, float] = (7.0, 23.0)
    default_device_prob: float = 0.7
    noise_devices: tuple[str, ...] = ()  # devices that only ever fire as noise
    noise_device_rate: float = 0.5  # firings per hour of each noise-only device
    start: datetime = datetime(2009, 1, 5)

    def validate(self) -> "SyntheticHomeSpec":
        names = [r.name for r in self.rooms]
        if len(set(names)) != len(names):
            raise SpecInvalid("room names must be unique")
        devices = [d for r in self.rooms for d in r.devices] + list(self.noise_devices)
        if len(set(devices)) != len(devices):
            raise SpecInvalid("a device id is declared twice")
        if not self.routines:
            raise SpecInvalid("at least one routine is required")
        for routine in self.routines:
            missing = set(routine.rooms) - set(names)
            if missing:
                raise SpecInvalid(f"routine references undeclared rooms {sorted(missing)}")
            lo, hi = routine.dwell
            if not 0 < lo <= hi:
                raise SpecInvalid("dwell range must satisfy 0 < lo <= hi")
            if routine.weight <= 0:
                raise SpecInvalid("routine weights must be positive")
            for dev, p in routine.fire_prob.items():
                if not 0.0 <= p <= 1.0:
                    raise SpecInvalid(f"firing probability for {dev} outside [0, 1]")
        if not 0.0 <= self.default_device_prob <= 1.0:
            raise SpecInvalid("default_device_prob outside [0, 1]")
        if (self.days < 1 or self.residents < 1 or self.noise_rate < 0 or self.noise_device_rate < 0
                or self.mean_interval <= 0):
            raise SpecInvalid("days and residents must be >= 1, rates non-negative")
        a, b = self.waking_hours
        if not 0 <= a < b <= 24:
            raise SpecInvalid("waking_hours must satisfy 0 <= start < end <= 24")
        return self


def _states(device: str) -> tuple[str, str]:
    return ("OPEN", "CLOSE") if infer_sensor_kind(device) == DOOR else ("ON", "OFF")


class _Log:
    def __init__(self):
        self.rows: list[tuple[int, int, str, str]] = []

    def pulse(self, device: str, t_on: float, duration: float):
        on, off = _states(device)
        a = int(round(t_on * 1e6))
        b = max(a + 1, int(round((t_on + duration) * 1e6)))
        self.rows.append((a, len(self.rows), device, on))
        self.rows.append((b, len(self.rows), device, off))


def _visit(log: _Log, rng: np.random.Generator, room: Room, routine: Routine, t: float,
           default_prob: float) -> float:
    """Simulate one room visit starting at ``t``; returns the leave time."""
    dwell = rng.uniform(*routine.dwell)
    leave = t + dwell
    for dev in room.devices:
        if infer_sensor_kind(dev) == MOTION:
            p = routine.fire_prob.get(dev, 1.0)
            if rng.random() >= p:
                continue
            s = t + rng.uniform(0.0, 3.0)
            while s < leave:
                on_for = rng.uniform(2.0, 8.0)
                log.pulse(dev, s, on_for)
                s += on_for + rng.uniform(5.0, 25.0)
        else:
            p = routine.fire_prob.get(dev, default_prob)
            if rng.random() < p:
                log.pulse(dev, t + rng.uniform(0.0, 0.8 * dwell), rng.uniform(2.0, 15.0))
    return leave


def generate_events(spec: SyntheticHomeSpec) -> list[tuple[int, str, str]]:
    """Simulated ``(microseconds since start, device, state)`` rows, time-ordered."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    rooms = {r.name: r for r in spec.rooms}
    weights = np.array([r.weight for r in spec.routines], dtype=float)
    weights /= weights.sum()
    log = _Log()
    wake, sleep = spec.waking_hours[0] * 3600.0, spec.waking_hours[1] * 3600.0
    for _resident in range(spec.residents):
        for day in range(spec.days):
            t = day * 86400.0 + wake
            end = day * 86400.0 + sleep
            while True:
                t += rng.exponential(spec.mean_interval)
                if t >= end:
                    break
                routine = spec.routines[rng.choice(len(spec.routines), p=weights)]
                for name in routine.rooms:
                    t = _visit(log, rng, rooms[name], routine, t, spec.default_device_prob)
                    t += rng.uniform(3.0, 10.0)
    all_devices = sorted({d for r in spec.rooms for d in r.devices} | set(spec.noise_devices))
    horizon = spec.days * 86400.0
    for dev in spec.noise_devices:
        n_noise = rng.poisson(spec.noise_device_rate * horizon / 3600.0)
        for t in np.sort(rng.uniform(0.0, horizon, size=n_noise)):
            log.pulse(dev, float(t), rng.uniform(1.0, 10.0))
    if spec.noise_rate > 0:
        n_noise = rng.poisson(spec.noise_rate * horizon / 3600.0)
        for t in np.sort(rng.uniform(0.0, horizon, size=n_noise)):
            log.pulse(all_devices[rng.integers(len(all_devices))], float(t), rng.uniform(1.0, 10.0))
    log.rows.sort()
    return [(us, dev, state) for us, _, dev, state in log.rows]


def _stamp(start: datetime, micros: int) -> str:
    return (start + timedelta(microseconds=micros)).strftime("%Y-%m-%d %H:%M:%S.%f")


def generate_synthetic_log(spec: SyntheticHomeSpec) -> list[str]:
    """Event-log lines (no trailing newlines) for the simulated home."""
    return [f"{_stamp(spec.start, us)} {dev} {state}" for us, dev, state in generate_events(spec)]


def ground_truth(spec: SyntheticHomeSpec) -> dict[str, str]:
    """Device id -> room name (noise-only devices map to ``"Noise"``)."""
    labels = {d: r.name for r in spec.rooms for d in r.devices}
    labels.update({d: "Noise" for d in spec.noise_devices})
    return labels


def three_room_home(seed: int = 0, days: int = 30, residents: int = 1, noise_rate: float = 0.5,
                    extra_kitchen: tuple[str, ...] = (), noise_devices: tuple[str, ...] = ()) -> SyntheticHomeSpec:
    """Kitchen / bedroom / bathroom home used by the demos and acceptance runs.

    ``extra_kitchen`` devices co-fire with kitchen visits;
    ``noise_devices`` fire only through the noise process.
    """
    rooms = [
        Room("Kitchen", ("M001", "M002", "M003", "D001", "D002", "I001") + tuple(extra_kitchen)),
        Room("Bedroom", ("M004", "M005", "M006", "D003", "S001", "I002")),
        Room("Bathroom", ("M007", "M008", "D004", "F001", "E001")),
    ]
    routines = [
        Routine(("Kitchen",), dwell=(90.0, 300.0), weight=3.0),
        Routine(("Bedroom",), dwell=(60.0, 240.0), weight=2.0),
        Routine(("Bathroom",), dwell=(60.0, 180.0), weight=2.0),
    ]
    return SyntheticHomeSpec(rooms, routines, days=days, residents=residents, noise_rate=noise_rate,
                             seed=seed, noise_devices=tuple(noise_devices))


def two_cluster_corpus(n_sessions: int = 5000, n_tokens: int = 10, seed: int = 0,
                       length: tuple[int, int] = (3, 8), mix: float = 0.1) -> list[list[str]]:
    """Token sessions drawn from two disjoint halves of the vocabulary.

    Each session picks one cluster; every token comes from that cluster
    except with probability ``mix``, when it comes from the other one.
    Tokens are ``t0 .. t{n-1}``; the first half is cluster A.
    """
    if n_tokens < 4 or n_sessions < 1 or not 0.0 <= mix <= 1.0:
        raise SpecInvalid("need n_tokens >= 4, n_sessions >= 1, 0 <= mix <= 1")
    rng = np.random.default_rng(seed)
    half = n_tokens // 2
    clusters = [np.arange(half), np.arange(half, n_tokens)]
    sessions = []
    for _ in range(n_sessions):
        home = rng.integers(2)
        n = rng.integers(length[0], length[1] + 1)
        away = rng.random(n) < mix
        toks = [rng.choice(clusters[1 - home] if a else clusters[home]) for a in away]
        sessions.append([f"t{t}" for t in toks])
    return sessions
