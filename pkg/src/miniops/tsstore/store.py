"""Persistence layer: metric partitions, log events, metadata KV.

Metric points land in mutable in-memory partitions (dicts keyed by series
and timestamp, which makes duplicate (series, ts) writes last-write-wins
for free). Once a partition's window is fully in the past plus a lateness
grace, it is sealed into an immutable columnar segment file. Queries merge
sealed segments with any still-mutable overlay and always equal a brute
force scan over the raw points.

The log store is an append-only event list persisted as JSON lines per
partition. The metadata store is a durable, strongly consistent KV file
used by the control plane, alert rules, tickets, and console panels.
"""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional

from ..records import LogEvent, MetricPoint, SeriesKey
from .segment import SealedSegment, write_segment
from .sql import Query

DEFAULT_PARTITION_S = 3600
DEFAULT_GRACE_S = 300
DEFAULT_METRIC_RETENTION_S = 2 * 365 * 24 * 3600
DEFAULT_LOG_RETENTION_S = 30 * 24 * 3600


@dataclass
class WriteReport:
    accepted: int = 0
    rejected_nonfinite: int = 0
    rejected_retention: int = 0


class MetricStore:
    """Columnar, compressed metric store with a mini-SQL query layer."""

    def __init__(self, data_dir: str | os.PathLike,
                 partition_s: int = DEFAULT_PARTITION_S,
                 grace_s: int = DEFAULT_GRACE_S,
                 retention_s: int = DEFAULT_METRIC_RETENTION_S):
        self.dir = Path(data_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.partition_ms = partition_s * 1000
        self.grace_ms = grace_s * 1000
        self.retention_ms = retention_s * 1000
        self._lock = threading.RLock()
        # partition start ms -> series -> ts -> value
        self._active: dict[int, dict[SeriesKey, dict[int, float]]] = {}
        self._sealed: dict[int, SealedSegment] = {}
        for path in sorted(self.dir.glob("*.seg")):
            seg = SealedSegment(path)
            self._sealed[seg.t0] = seg

    # -- writes -----------------------------------------------------------

    def _partition_of(self, ts: int) -> int:
        return (ts // self.partition_ms) * self.partition_ms

    def write_points(self, points: Iterable[MetricPoint],
                     now: Optional[int] = None) -> WriteReport:
        """Ingest points; last write wins on duplicate (series, ts)."""
        report = WriteReport()
        floor = None if now is None else now - self.retention_ms
        with self._lock:
            for point in points:
                if not math.isfinite(point.value):
                    report.rejected_nonfinite += 1
                    continue
                if point.series.tag("server") is None:
                    raise ValueError(f"series {point.series} missing required tag 'server'")
                if floor is not None and point.ts < floor:
                    report.rejected_retention += 1
                    continue
                part = self._partition_of(point.ts)
                series_map = self._active.setdefault(part, {})
                series_map.setdefault(point.series, {})[point.ts] = float(point.value)
                report.accepted += 1
        return report

    # -- sealing and retention ---------------------------------------------

    def sealable_partitions(self, now: int) -> list[int]:
        with self._lock:
            return sorted(
                part for part in self._active
                if part + self.partition_ms + self.grace_ms <= now and part not in self._sealed
            )

    def seal_partition(self, part: int) -> SealedSegment:
        """Encode one partition's buffered points and swap in the segment."""
        with self._lock:
            series_map = self._active.get(part, {})
            encoded = {
                key: sorted(ts_map.items())
                for key, ts_map in series_map.items() if ts_map
            }
            path = self.dir / f"{part:020d}.seg"
            write_segment(path, part, part + self.partition_ms, encoded)
            seg = SealedSegment(path)
            self._sealed[part] = seg
            self._active.pop(part, None)
            return seg

    def maintain(self, now: int) -> list[int]:
        """Seal every partition whose window plus grace is fully past."""
        sealed = []
        for part in self.sealable_partitions(now):
            self.seal_partition(part)
            sealed.append(part)
        return sealed

    def enforce_retention(self, now: int) -> list[int]:
        """Atomically drop partitions strictly older than the retention window."""
        dropped = []
        cutoff = now - self.retention_ms
        with self._lock:
            for part in sorted(set(self._active) | set(self._sealed)):
                if part + self.partition_ms <= cutoff:
                    self._active.pop(part, None)
                    seg = self._sealed.pop(part, None)
                    if seg is not None:
                        seg.path.unlink(missing_ok=True)
                    dropped.append(part)
        return dropped

    # -- reads --------------------------------------------------------------

    def partitions(self) -> list[int]:
        with self._lock:
            return sorted(set(self._active) | set(self._sealed))

    def point_count(self) -> int:
        """Distinct (series, ts) count over all partitions, for reconciliation."""
        total = 0
        with self._lock:
            parts = sorted(set(self._active) | set(self._sealed))
            for part in parts:
                merged: dict[SeriesKey, set[int]] = {}
                seg = self._sealed.get(part)
                if seg is not None:
                    for key in seg.series_keys():
                        merged.setdefault(key, set()).update(
                            ts for ts, _ in seg.read_series(key))
                for key, ts_map in self._active.get(part, {}).items():
                    merged.setdefault(key, set()).update(ts_map)
                total += sum(len(s) for s in merged.values())
        return total

    def _matching_points(self, q: Query) -> dict[SeriesKey, list[tuple[int, float]]]:
        """Collect raw matching points per series, overlay over sealed."""
        out: dict[SeriesKey, dict[int, float]] = {}

        def matches(key: SeriesKey) -> bool:
            if key.name != q.metric:
                return False
            return all(key.tag(fk) == fv for fk, fv in q.filters)

        with self._lock:
            parts = sorted(set(self._active) | set(self._sealed))
            for part in parts:
                if part + self.partition_ms <= q.from_ms or part >= q.to_ms:
                    continue
                seg = self._sealed.get(part)
                if seg is not None:
                    for key in seg.series_keys():
                        if not matches(key):
                            continue
                        dst = out.setdefault(key, {})
                        for ts, value in seg.read_series(key):
                            if q.from_ms <= ts < q.to_ms:
                                dst[ts] = value
                for key, ts_map in self._active.get(part, {}).items():
                    if not matches(key):
                        continue
                    dst = out.setdefault(key, {})
                    for ts, value in ts_map.items():
                        if q.from_ms <= ts < q.to_ms:
                            dst[ts] = value
        return {key: sorted(ts_map.items()) for key, ts_map in out.items() if ts_map}

    def query(self, q: Query) -> list[tuple[tuple[str, ...], int, float]]:
        """Run a query; rows are (group tag values, bucket start ms, value).

        Buckets are aligned to the query's ``from`` bound; empty buckets are
        omitted. Without a time() grouping the whole range is one bucket.
        ``last`` takes the value at the maximum timestamp, breaking cross
        series ties by canonical series key.
        """
        q.validate()
        per_series = self._matching_points(q)
        bucket_ms = q.bucket_s * 1000 if q.bucket_s is not None else None
        # (group, bucket) -> list of (ts, canonical key, value)
        cells: dict[tuple[tuple[str, ...], int], list[tuple[int, str, float]]] = {}
        for key, points in per_series.items():
            group = tuple(key.tag(g) or "" for g in q.group_by)
            canonical = key.canonical
            for ts, value in points:
                if bucket_ms is None:
                    bucket = q.from_ms
                else:
                    bucket = q.from_ms + ((ts - q.from_ms) // bucket_ms) * bucket_ms
                cells.setdefault((group, bucket), []).append((ts, canonical, value))
        rows = []
        for (group, bucket), entries in cells.items():
            values = [v for _, _, v in entries]
            agg = q.agg
            if agg == "avg":
                value = sum(values) / len(values)
            elif agg == "min":
                value = min(values)
            elif agg == "max":
                value = max(values)
            elif agg == "sum":
                value = sum(values)
            elif agg == "count":
                value = float(len(values))
            else:  # last
                value = max(entries)[2]
            rows.append((group, bucket, value))
        rows.sort(key=lambda row: (row[0], row[1]))
        return rows


class LogStore:
    """Append-only log-event store with linear-scan filters."""

    def __init__(self, data_dir: str | os.PathLike,
                 partition_s: int = 24 * 3600,
                 retention_s: int = DEFAULT_LOG_RETENTION_S):
        self.dir = Path(data_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.partition_ms = partition_s * 1000
        self.retention_ms = retention_s * 1000
        self._lock = threading.Lock()
        self._events: dict[int, list[LogEvent]] = {}
        for path in sorted(self.dir.glob("*.jsonl")):
            part = int(path.stem)
            events = []
            for line in path.read_text().splitlines():
                doc = json.loads(line)
                events.append(LogEvent(doc["ts"], doc["server"], doc["level"],
                                       doc["message"], tuple((k, v) for k, v in doc["fields"])))
            self._events[part] = events

    def store(self, events: Iterable[LogEvent]) -> int:
        count = 0
        with self._lock:
            by_part: dict[int, list[LogEvent]] = {}
            for event in events:
                part = (event.ts // self.partition_ms) * self.partition_ms
                by_part.setdefault(part, []).append(event)
                count += 1
            for part, batch in by_part.items():
                self._events.setdefault(part, []).extend(batch)
                with open(self.dir / f"{part:020d}.jsonl", "a") as fh:
                    for event in batch:
                        fh.write(json.dumps({
                            "ts": event.ts, "server": event.server,
                            "level": event.level, "message": event.message,
                            "fields": [list(kv) for kv in event.fields],
                        }) + "\n")
        return count

    def query(self, level: Optional[str] = None, server: Optional[str] = None,
              contains: Optional[str] = None, from_ms: Optional[int] = None,
              to_ms: Optional[int] = None) -> list[LogEvent]:
        with self._lock:
            matched = []
            for part in sorted(self._events):
                for event in self._events[part]:
                    if level is not None and event.level != level:
                        continue
                    if server is not None and event.server != server:
                        continue
                    if contains is not None and contains not in event.message:
                        continue
                    if from_ms is not None and event.ts < from_ms:
                        continue
                    if to_ms is not None and event.ts >= to_ms:
                        continue
                    matched.append(event)
        matched.sort(key=lambda e: e.ts)
        return matched

    def count(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._events.values())

    def enforce_retention(self, now: int) -> list[int]:
        dropped = []
        cutoff = now - self.retention_ms
        with self._lock:
            for part in sorted(self._events):
                if part + self.partition_ms <= cutoff:
                    del self._events[part]
                    (self.dir / f"{part:020d}.jsonl").unlink(missing_ok=True)
                    dropped.append(part)
        return dropped


class MetadataStore:
    """Durable key-value buckets with read-your-writes consistency.

    Backs the small, strongly consistent data: server registry, task
    templates, alert rules, tickets, triage rules, console panels.
    """

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        if self.path.exists():
            self._data: dict[str, dict[str, Any]] = json.loads(self.path.read_text())
        else:
            self._data = {}

    def _persist(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._data, sort_keys=True))
        os.replace(tmp, self.path)

    def put(self, bucket: str, key: str, value: Any) -> None:
        with self._lock:
            self._data.setdefault(bucket, {})[key] = value
            self._persist()

    def get(self, bucket: str, key: str, default: Any = None) -> Any:
        with self._lock:
            return self._data.get(bucket, {}).get(key, default)

    def delete(self, bucket: str, key: str) -> bool:
        with self._lock:
            bucket_map = self._data.get(bucket, {})
            if key in bucket_map:
                del bucket_map[key]
                self._persist()
                return True
            return False

    def items(self, bucket: str) -> dict[str, Any]:
        with self._lock:
            return dict(self._data.get(bucket, {}))
