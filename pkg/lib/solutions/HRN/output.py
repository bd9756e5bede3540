"""Output files: record streams, field snapshots and CSV series.

Record streams are newline-delimited JSON. The first line is a header
``{"config_hash": ..., "stream": ..., "fields": [...]}`` and every further
line is a flat record whose keys follow ``fields``. Lines are flushed as
they are written, so an interrupted run leaves a parseable prefix.

Snapshots are binary: a text line ``# config_hash=<hex>\\n``, the magic
bytes ``NSVSNAP1``, three little-endian uint32 (dim, points per axis,
number of stored arrays), a little-endian float64 time and then the arrays
as row-major little-endian float64: the density followed by the d velocity
components.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import struct
from typing import Any, Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from ..errors import ContractViolation

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"NSVSNAP1"
_SNAPSHOT_LAYOUT = struct.Struct("<III")
_SNAPSHOT_TIME = struct.Struct("<d")


def _plain(value: Any) -> Any:
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class RecordStream:
    """Append-only newline-delimited JSON file with a schema header."""

    def __init__(self, path: str, stream: str, fields: Sequence[str], config_hash: str) -> None:
        self.path = path
        self.fields = list(fields)
        self._file = open(path, "w", encoding="utf-8", newline="\n")
        self._write({"config_hash": config_hash, "stream": stream, "fields": self.fields})

    def _write(self, payload: Mapping[str, Any]) -> None:
        self._file.write(json.dumps(payload) + "\n")
        self._file.flush()

    def append(self, values: Mapping[str, Any]) -> None:
        missing = [name for name in self.fields if name not in values]
        if missing:
            raise ContractViolation(f"record for {self.path} misses fields {missing}")
        self._write({name: _plain(values[name]) for name in self.fields})

    def append_tuple(self, entry: NamedTuple) -> None:
        self.append(entry._asdict())

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> "RecordStream":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


class StreamContents(NamedTuple):
    header: dict[str, Any]
    records: list[dict[str, Any]]


def read_stream(path: str) -> StreamContents:
    """Header and records of a stream; a truncated last line is dropped."""
    with open(path, "rt", encoding="utf-8") as f:
        lines = f.read().split("\n")
    header = json.loads(lines[0])
    records = []
    for line in lines[1:]:
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            logger.warning("ignoring truncated record in %s", path)
            break
    return StreamContents(header, records)


def snapshot_path(directory: str, index: int) -> str:
    return os.path.join(directory, f"snapshot_{index:06d}.bin")


def write_snapshot(path: str, config_hash: str, time: float, rho: np.ndarray, velocity: np.ndarray) -> None:
    dim = rho.ndim
    if velocity.shape != (dim,) + rho.shape:
        raise ContractViolation(f"velocity of shape {velocity.shape} does not match density {rho.shape}")
    arrays = np.concatenate([rho[np.newaxis], velocity]).astype("<f8")
    with open(path, "wb") as f:
        f.write(f"# config_hash={config_hash}\n".encode("ascii"))
        f.write(SNAPSHOT_MAGIC)
        f.write(_SNAPSHOT_LAYOUT.pack(dim, rho.shape[0], arrays.shape[0]))
        f.write(_SNAPSHOT_TIME.pack(float(time)))
        f.write(np.ascontiguousarray(arrays).tobytes())


class Snapshot(NamedTuple):
    config_hash: str
    time: float
    rho: np.ndarray
    velocity: np.ndarray


def read_snapshot(path: str) -> Snapshot:
    with open(path, "rb") as f:
        header = f.readline().decode("ascii").strip()
        if not header.startswith("# config_hash="):
            raise ContractViolation(f"{path} has no config hash header")
        if f.read(len(SNAPSHOT_MAGIC)) != SNAPSHOT_MAGIC:
            raise ContractViolation(f"{path} is not a snapshot file")
        dim, points, count = _SNAPSHOT_LAYOUT.unpack(f.read(_SNAPSHOT_LAYOUT.size))
        (time,) = _SNAPSHOT_TIME.unpack(f.read(_SNAPSHOT_TIME.size))
        arrays = np.frombuffer(f.read(), dtype="<f8").reshape((count,) + (points,) * dim)
    return Snapshot(header.split("=", 1)[1], time, arrays[0].copy(), arrays[1:].copy())


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]], config_hash: Optional[str] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        if config_hash is not None:
            f.write(f"# config_hash={config_hash}\n")
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({name: _plain(row.get(name)) for name in columns})
