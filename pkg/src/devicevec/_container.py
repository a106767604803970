"""Versioned binary container shared by model and registry files.

Layout (little endian)::

    b"DVEC" | u16 version | u32 meta_len | meta (utf-8 JSON)
    u32 n_matrices | n x (u32 rows | u32 cols | rows*cols float32)
"""

from __future__ import annotations

import json
import os
import struct
from typing import BinaryIO

import numpy as np

MAGIC = b"DVEC"
FORMAT_VERSION = 1


class CorruptModelFile(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


def dump(meta: dict, matrices: list[np.ndarray]) -> bytes:
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(meta_bytes)), meta_bytes,
             struct.pack("<I", len(matrices))]
    for m in matrices:
        m = np.ascontiguousarray(m, dtype="<f4")
        if m.ndim != 2:
            raise ValueError("only 2-D matrices can be stored")
        parts.append(struct.pack("<II", *m.shape))
        parts.append(m.tobytes())
    return b"".join(parts)


def load(data: bytes) -> tuple[dict, list[np.ndarray]]:
    if len(data) < 4 or data[:4] != MAGIC:
        raise CorruptModelFile("bad magic bytes")
    pos = 4

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CorruptModelFile(f"truncated at byte {pos} (wanted {n} more)")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (version,) = struct.unpack("<H", take(2))
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"file format version {version}, expected {FORMAT_VERSION}")
    (meta_len,) = struct.unpack("<I", take(4))
    try:
        meta = json.loads(take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModelFile(f"unreadable metadata block: {exc}") from None
    (count,) = struct.unpack("<I", take(4))
    matrices = []
    for _ in range(count):
        rows, cols = struct.unpack("<II", take(8))
        buf = take(rows * cols * 4)
        matrices.append(np.frombuffer(buf, dtype="<f4").reshape(rows, cols).astype(np.float32))
    if pos != len(data):
        raise CorruptModelFile(f"{len(data) - pos} trailing bytes")
    return meta, matrices


def write(sink: BinaryIO | str | os.PathLike, meta: dict, matrices: list[np.ndarray]) -> None:
    blob = dump(meta, matrices)
    if hasattr(sink, "write"):
        sink.write(blob)
    else:
        with open(sink, "wb") as fh:
            fh.write(blob)


def read(source: BinaryIO | str | os.PathLike) -> tuple[dict, list[np.ndarray]]:
    if hasattr(source, "read"):
        return load(source.read())
    with open(source, "rb") as fh:
        return load(fh.read())
