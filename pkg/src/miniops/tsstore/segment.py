"""Sealed segment files: immutable columnar blocks of metric points.

File layout (all integers little-endian; documented in docs/storage-format.md):

    offset 0      magic "MOPS1"
    offset 5      u8   format version (1)
    offset 6      u64  t0  (partition start, epoch ms, inclusive)
    offset 14     u64  t1  (partition end, epoch ms, exclusive)
    offset 22     per-series blocks, back to back:
                      timestamp block (delta-of-delta varints)
                      value block     (XOR float stream)
    ...           footer: UTF-8 JSON index, one entry per series with
                      name, tags, point count, block offsets and lengths
    end-9         u32  footer length
    end-5         magic "MOPS1"

Sealed segments are immutable: the writer builds the whole file in memory
and publishes it with an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Iterator

from ..records import SeriesKey
from . import gorilla

MAGIC = b"MOPS1"
VERSION = 1
_HEADER = struct.Struct("<5sBQQ")
_FOOTER_LEN = struct.Struct("<I")


class SegmentFormatError(Exception):
    pass


def write_segment(path: Path, t0: int, t1: int,
                  series: dict[SeriesKey, list[tuple[int, float]]]) -> int:
    """Encode sorted, deduplicated per-series points and atomically publish.

    ``series`` maps each key to its (ts, value) points sorted by strictly
    increasing ts. Returns the file size in bytes.
    """
    body = bytearray()
    index = []
    for key in sorted(series, key=lambda k: k.canonical):
        points = series[key]
        ts_block = gorilla.encode_timestamps([ts for ts, _ in points])
        val_block = gorilla.encode_values([v for _, v in points])
        ts_off = _HEADER.size + len(body)
        body.extend(ts_block)
        val_off = _HEADER.size + len(body)
        body.extend(val_block)
        index.append({
            "name": key.name,
            "tags": [list(kv) for kv in key.tags],
            "count": len(points),
            "ts_off": ts_off,
            "ts_len": len(ts_block),
            "val_off": val_off,
            "val_len": len(val_block),
        })
    footer = json.dumps({"series": index}, separators=(",", ":")).encode("utf-8")
    blob = bytearray()
    blob.extend(_HEADER.pack(MAGIC, VERSION, t0, t1))
    blob.extend(body)
    blob.extend(footer)
    blob.extend(_FOOTER_LEN.pack(len(footer)))
    blob.extend(MAGIC)

    tmp = path.with_suffix(".seg.tmp")
    tmp.write_bytes(blob)
    with open(tmp, "rb") as fh:
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return len(blob)


class SealedSegment:
    """Read-only view over one sealed segment file."""

    def __init__(self, path: Path):
        self.path = path
        data = path.read_bytes()
        if len(data) < _HEADER.size + _FOOTER_LEN.size + len(MAGIC):
            raise SegmentFormatError(f"{path}: truncated segment")
        magic, version, self.t0, self.t1 = _HEADER.unpack_from(data, 0)
        if magic != MAGIC or data[-len(MAGIC):] != MAGIC:
            raise SegmentFormatError(f"{path}: bad magic")
        if version != VERSION:
            raise SegmentFormatError(f"{path}: unsupported version {version}")
        (footer_len,) = _FOOTER_LEN.unpack_from(data, len(data) - len(MAGIC) - _FOOTER_LEN.size)
        footer_start = len(data) - len(MAGIC) - _FOOTER_LEN.size - footer_len
        footer = json.loads(data[footer_start : footer_start + footer_len].decode("utf-8"))
        self._data = data
        self._index: dict[SeriesKey, dict] = {}
        for entry in footer["series"]:
            key = SeriesKey(entry["name"], tuple((k, v) for k, v in entry["tags"]))
            self._index[key] = entry

    @property
    def size_bytes(self) -> int:
        return len(self._data)

    def series_keys(self) -> list[SeriesKey]:
        return list(self._index)

    def point_count(self, key: SeriesKey) -> int:
        entry = self._index.get(key)
        return 0 if entry is None else entry["count"]

    def read_series(self, key: SeriesKey) -> list[tuple[int, float]]:
        entry = self._index.get(key)
        if entry is None:
            return []
        ts_block = self._data[entry["ts_off"] : entry["ts_off"] + entry["ts_len"]]
        val_block = self._data[entry["val_off"] : entry["val_off"] + entry["val_len"]]
        timestamps = gorilla.decode_timestamps(ts_block)
        values = gorilla.decode_values(val_block, entry["count"])
        return list(zip(timestamps, values))

    def iter_series(self) -> Iterator[tuple[SeriesKey, list[tuple[int, float]]]]:
        for key in self._index:
            yield key, self.read_series(key)
