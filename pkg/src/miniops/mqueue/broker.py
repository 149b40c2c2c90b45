"""Single-node durable topic log with multi-group consumption and trim.

Every topic is a directory of append-only segment files. The on-disk record
format is fixed so external tools can read it:

    repeated [u32 LE length][payload bytes][u32 LE CRC32 of payload]

Segment files are named ``{first_offset:020d}.seg`` and roll when they
exceed the configured size. Per-group commits live in
``{topic}/offsets/{group}.json`` as ``{"committed": <int>}`` where the
committed value is the next offset the group will read.

Durability contract: ``publish`` returns only after the record is flushed
and fsynced; ``commit`` returns only after the offset file is durably
replaced. Recovery scans segments, drops a torn tail record, and rebuilds
heads from file content alone.
"""

from __future__ import annotations

import io
import json
import os
import re
import struct
import threading
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

_TOPIC_RE = re.compile(r"^[a-z0-9._-]+$")
_LEN = struct.Struct("<I")

DEFAULT_SEGMENT_BYTES = 8 * 1024 * 1024


class BrokerError(Exception):
    pass


class UnknownGroupError(BrokerError):
    pass


class CorruptSegmentError(BrokerError):
    pass


@dataclass(frozen=True)
class QueueMessage:
    topic: str
    offset: int
    payload: bytes
    enqueued_at: int
    crc: int


@dataclass
class _Segment:
    path: Path
    first_offset: int
    # byte position of each record's length prefix, in offset order
    positions: list[int]
    size: int

    @property
    def next_offset(self) -> int:
        return self.first_offset + len(self.positions)

    @property
    def last_offset(self) -> int:
        return self.first_offset + len(self.positions) - 1


def _scan_segment(path: Path) -> tuple[list[int], int]:
    """Scan one segment file, returning record positions and the clean size.

    A torn tail (truncated length prefix, payload, or CRC trailer) is cut at
    the last clean record boundary. A CRC mismatch inside the clean region
    raises CorruptSegmentError: that is damage, not an interrupted append.
    """
    positions: list[int] = []
    data = path.read_bytes()
    pos = 0
    while pos + 4 <= len(data):
        (length,) = _LEN.unpack_from(data, pos)
        end = pos + 4 + length + 4
        if end > len(data):
            break  # torn tail
        payload = data[pos + 4 : pos + 4 + length]
        (crc,) = _LEN.unpack_from(data, pos + 4 + length)
        if zlib.crc32(payload) & 0xFFFFFFFF != crc:
            raise CorruptSegmentError(f"{path}: CRC mismatch at byte {pos}")
        positions.append(pos)
        pos = end
    return positions, pos


class _TopicLog:
    """One topic: its segments, head offset, and registered groups."""

    def __init__(self, name: str, directory: Path, segment_bytes: int):
        self.name = name
        self.dir = directory
        self.segment_bytes = segment_bytes
        self.lock = threading.RLock()
        self.segments: list[_Segment] = []
        self.groups: dict[str, int] = {}
        self._writer: Optional[io.BufferedWriter] = None
        self._recover()

    # -- recovery ---------------------------------------------------------

    def _recover(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "offsets").mkdir(exist_ok=True)
        for seg_path in sorted(self.dir.glob("*.seg")):
            first_offset = int(seg_path.stem)
            positions, clean_size = _scan_segment(seg_path)
            if clean_size < seg_path.stat().st_size:
                with open(seg_path, "r+b") as fh:
                    fh.truncate(clean_size)
            self.segments.append(_Segment(seg_path, first_offset, positions, clean_size))
        for off_path in (self.dir / "offsets").glob("*.json"):
            doc = json.loads(off_path.read_text())
            self.groups[off_path.stem] = int(doc["committed"])

    @property
    def head(self) -> int:
        if not self.segments:
            return 0
        return self.segments[-1].next_offset

    @property
    def first_available(self) -> int:
        if not self.segments:
            return self.head
        return self.segments[0].first_offset

    # -- append path ------------------------------------------------------

    def _active_writer(self, next_offset: Optional[int] = None) -> tuple[io.BufferedWriter, _Segment]:
        """The writable tail segment, rolling if full.

        ``next_offset`` is the offset the next record will receive; a
        mid-append roll must use it because staged records have not advanced
        the head yet.
        """
        if self.segments and self.segments[-1].size < self.segment_bytes:
            seg = self.segments[-1]
            if self._writer is None or self._writer.name != str(seg.path):
                self._close_writer()
                self._writer = open(seg.path, "ab")
            return self._writer, seg
        self._close_writer()
        first_offset = self.head if next_offset is None else next_offset
        seg = _Segment(self.dir / f"{first_offset:020d}.seg", first_offset, [], 0)
        self.segments.append(seg)
        self._writer = open(seg.path, "ab")
        return self._writer, seg

    def _close_writer(self) -> None:
        """Durably close the active writer: flush, fsync, close."""
        if self._writer is not None:
            writer, self._writer = self._writer, None
            writer.flush()
            os.fsync(writer.fileno())
            writer.close()

    def append_many(self, payloads: list[bytes]) -> list[int]:
        """Append payloads, fsyncing once per touched segment file.

        Either all records become visible (head advances last) or none: on a
        write error every touched file is truncated back to its prior size.
        Rolling to a new segment durably closes the previous one.
        """
        with self.lock:
            touched: list[tuple[_Segment, int, int]] = []  # seg, old size, old count
            staged: list[tuple[_Segment, list[int]]] = []
            writer: Optional[io.BufferedWriter] = None
            base = self.head
            appended = 0
            try:
                for payload in payloads:
                    writer, seg = self._active_writer(next_offset=base + appended)
                    if not touched or touched[-1][0] is not seg:
                        touched.append((seg, seg.size, len(seg.positions)))
                        staged.append((seg, []))
                    record = (_LEN.pack(len(payload)) + payload
                              + _LEN.pack(zlib.crc32(payload) & 0xFFFFFFFF))
                    writer.write(record)
                    staged[-1][1].append(seg.size)
                    seg.size += len(record)  # provisional, for rolling decisions
                    appended += 1
                if writer is not None:
                    writer.flush()
                    os.fsync(writer.fileno())
            except (OSError, ValueError):
                try:
                    if self._writer is not None:
                        self._writer.close()
                finally:
                    self._writer = None
                for seg, old_size, old_count in touched:
                    if old_size == 0 and old_count == 0:
                        # segment born in this append: remove it entirely
                        seg.path.unlink(missing_ok=True)
                        self.segments.remove(seg)
                        continue
                    with open(seg.path, "r+b") as fh:
                        fh.truncate(old_size)
                    seg.size = old_size
                    del seg.positions[old_count:]
                raise
            offsets: list[int] = []
            for seg, positions in staged:
                for pos in positions:
                    offsets.append(seg.first_offset + len(seg.positions))
                    seg.positions.append(pos)
            return offsets

    # -- read path --------------------------------------------------------

    def read(self, start: int, max_messages: int) -> list[QueueMessage]:
        with self.lock:
            wanted = range(start, min(self.head, start + max_messages))
            plan: list[tuple[_Segment, int]] = []
            for offset in wanted:
                seg = self._segment_for(offset)
                if seg is None:
                    raise BrokerError(f"offset {offset} trimmed from topic {self.name!r}")
                plan.append((seg, offset))
        out: list[QueueMessage] = []
        handle_cache: dict[Path, bytes] = {}
        for seg, offset in plan:
            data = handle_cache.get(seg.path)
            if data is None:
                data = seg.path.read_bytes()
                handle_cache[seg.path] = data
            pos = seg.positions[offset - seg.first_offset]
            (length,) = _LEN.unpack_from(data, pos)
            payload = bytes(data[pos + 4 : pos + 4 + length])
            (crc,) = _LEN.unpack_from(data, pos + 4 + length)
            if zlib.crc32(payload) & 0xFFFFFFFF != crc:
                raise CorruptSegmentError(f"{seg.path}: CRC mismatch reading offset {offset}")
            enqueued_at = int(seg.path.stat().st_mtime * 1000)
            out.append(QueueMessage(self.name, offset, payload, enqueued_at, crc))
        return out

    def _segment_for(self, offset: int) -> Optional[_Segment]:
        for seg in self.segments:
            if seg.first_offset <= offset <= seg.last_offset:
                return seg
        return None

    # -- groups -----------------------------------------------------------

    def commit_path(self, group: str) -> Path:
        return self.dir / "offsets" / f"{group}.json"

    def write_commit(self, group: str, committed: int) -> None:
        path = self.commit_path(group)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps({"committed": committed}))
        with open(tmp, "rb") as fh:
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    # -- trim ---------------------------------------------------------------

    def trim(self, retention_floor_s: float, now: Optional[float] = None) -> int:
        """Delete segments every group has fully consumed, respecting age."""
        now = time.time() if now is None else now
        with self.lock:
            if not self.groups:
                return 0
            floor = min(self.groups.values())
            reclaimed = 0
            # never the active (last) segment: it still receives appends
            while len(self.segments) > 1:
                seg = self.segments[0]
                if seg.last_offset >= floor:
                    break
                age = now - seg.path.stat().st_mtime
                if age < retention_floor_s:
                    break
                seg.path.unlink()
                self.segments.pop(0)
                reclaimed += 1
            return reclaimed


class Broker:
    """Durable topic queue: publish, per-group poll/commit, trim."""

    def __init__(self, data_dir: str | os.PathLike, segment_bytes: int = DEFAULT_SEGMENT_BYTES,
                 retention_floor_s: float = 0.0):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.segment_bytes = segment_bytes
        self.retention_floor_s = retention_floor_s
        self._lock = threading.Lock()
        self._topics: dict[str, _TopicLog] = {}
        for entry in sorted(self.data_dir.iterdir()):
            if entry.is_dir():
                self._topics[entry.name] = _TopicLog(entry.name, entry, segment_bytes)

    def _topic(self, name: str, create: bool = False) -> _TopicLog:
        if not _TOPIC_RE.match(name):
            raise BrokerError(f"invalid topic name {name!r}")
        with self._lock:
            log = self._topics.get(name)
            if log is None:
                if not create:
                    raise BrokerError(f"unknown topic {name!r}")
                log = _TopicLog(name, self.data_dir / name, self.segment_bytes)
                self._topics[name] = log
            return log

    def list_topics(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)

    def publish(self, topic: str, payload: bytes) -> int:
        return self.publish_many(topic, [payload])[0]

    def publish_many(self, topic: str, payloads: Iterable[bytes]) -> list[int]:
        """Durably append payloads in order; one fsync for the whole call."""
        payloads = [bytes(p) for p in payloads]
        if not payloads:
            return []
        log = self._topic(topic, create=True)
        with log.lock:
            return log.append_many(payloads)

    def head(self, topic: str) -> int:
        return self._topic(topic, create=True).head

    def register_group(self, group_id: str, topic: str, start: str = "earliest") -> None:
        if start not in ("earliest", "head"):
            raise BrokerError(f"invalid start {start!r}: expected 'earliest' or 'head'")
        log = self._topic(topic, create=True)
        with log.lock:
            if group_id in log.groups:
                raise BrokerError(f"group {group_id!r} already registered on {topic!r}")
            committed = log.first_available if start == "earliest" else log.head
            log.groups[group_id] = committed
            log.write_commit(group_id, committed)

    def groups(self, topic: str) -> dict[str, int]:
        log = self._topic(topic, create=True)
        with log.lock:
            return dict(log.groups)

    def poll(self, group_id: str, topic: str, max_messages: int) -> list[QueueMessage]:
        log = self._topic(topic)
        with log.lock:
            if group_id not in log.groups:
                raise UnknownGroupError(f"group {group_id!r} not registered on {topic!r}")
            start = log.groups[group_id]
        return log.read(start, max_messages)

    def commit(self, group_id: str, topic: str, offset: int) -> int:
        """Advance the group's cursor to ``offset`` (the next offset to read)."""
        log = self._topic(topic)
        with log.lock:
            if group_id not in log.groups:
                raise UnknownGroupError(f"group {group_id!r} not registered on {topic!r}")
            if offset > log.head:
                raise BrokerError(f"commit {offset} beyond head {log.head} on {topic!r}")
            committed = max(log.groups[group_id], offset)
            if committed != log.groups[group_id]:
                log.groups[group_id] = committed
                log.write_commit(group_id, committed)
            return committed

    def trim(self, topic: str, now: Optional[float] = None) -> int:
        return self._topic(topic, create=True).trim(self.retention_floor_s, now)

    def stats(self) -> dict[str, dict]:
        """Heads, commits, and lag per topic, for health reporting."""
        out: dict[str, dict] = {}
        for name in self.list_topics():
            log = self._topic(name)
            with log.lock:
                out[name] = {
                    "head": log.head,
                    "groups": dict(log.groups),
                    "lag": {g: log.head - c for g, c in log.groups.items()},
                    "segments": len(log.segments),
                }
        return out

    def close(self) -> None:
        with self._lock:
            for log in self._topics.values():
                with log.lock:
                    log._close_writer()
