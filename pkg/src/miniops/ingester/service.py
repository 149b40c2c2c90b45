"""Receives compressed batches, validates, transforms, publishes to the queue.

Whole-batch atomicity: a batch is either fully published or not at all.
Validation and hooks run before anything touches the queue, so a 400
can never leave partial records behind, and the queue's transactional
append covers the publish itself.

Duplicate batch_ids inside the dedup window are acknowledged without
republication, which turns the agents' at-least-once retries into
at-most-once publication (the store's last-write-wins closes the loop
to effectively-once).
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..mqueue import Broker, BrokerError
from ..records import Batch, Record, SchemaError, decode_batch

DEFAULT_DEDUP_HORIZON_S = 24 * 3600


class IngestError(Exception):
    """Rejection with an HTTP-like status: 400 bad batch, 503 queue down."""

    def __init__(self, status: int, message: str, record_index: Optional[int] = None):
        super().__init__(message)
        self.status = status
        self.record_index = record_index


@dataclass
class TransformHook:
    """Pure per-topic transformation: records in, records out.

    May re-topic, enrich, or drop records; must be deterministic and must
    not raise on valid records.
    """

    hook_id: str
    input_topic: str
    fn: Callable[[list[Record]], list[Record]]


class DedupWindow:
    """Remembers batch_ids for at least ``horizon_seconds``.

    Time-bucketed sets keep memory bounded: expiry drops whole buckets
    strictly older than the horizon.
    """

    def __init__(self, horizon_seconds: int = DEFAULT_DEDUP_HORIZON_S, bucket_seconds: int = 600):
        self.horizon_s = horizon_seconds
        self.bucket_s = bucket_seconds
        self._lock = threading.Lock()
        self._buckets: dict[int, set[str]] = {}

    def check_and_insert(self, batch_id: str, now_s: Optional[float] = None) -> bool:
        """Atomically record the id; True if it was already present."""
        now_s = time.time() if now_s is None else now_s
        bucket = int(now_s // self.bucket_s)
        with self._lock:
            expired = [b for b in self._buckets
                       if (bucket - b) * self.bucket_s > self.horizon_s]
            for b in expired:
                del self._buckets[b]
            if any(batch_id in ids for ids in self._buckets.values()):
                return True
            self._buckets.setdefault(bucket, set()).add(batch_id)
            return False

    def forget(self, batch_id: str) -> None:
        with self._lock:
            for ids in self._buckets.values():
                ids.discard(batch_id)


@dataclass
class IngestResult:
    batch_id: str
    published: int
    duplicate: bool = False
    offsets: dict[str, int] = field(default_factory=dict)


class Ingester:
    def __init__(self, broker: Broker, dedup_horizon_s: int = DEFAULT_DEDUP_HORIZON_S):
        self.broker = broker
        self.dedup = DedupWindow(dedup_horizon_s)
        self._hooks: dict[str, TransformHook] = {}
        self._lock = threading.Lock()

    def register_hook(self, hook: TransformHook) -> None:
        """At most one hook per input topic; duplicates are rejected."""
        with self._lock:
            if hook.input_topic in self._hooks:
                raise ValueError(f"hook already registered for topic {hook.input_topic!r}")
            self._hooks[hook.input_topic] = hook

    def _transform(self, records: list[Record]) -> list[Record]:
        by_topic: dict[str, list[Record]] = {}
        for record in records:
            by_topic.setdefault(record.topic, []).append(record)
        out: list[Record] = []
        for topic, group in by_topic.items():
            hook = self._hooks.get(topic)
            out.extend(hook.fn(group) if hook else group)
        return out

    def publish_records(self, records: list[Record]) -> dict[str, int]:
        """Append records per topic in batch order; returns last offset per topic."""
        by_topic: dict[str, list[bytes]] = {}
        for record in records:
            payload = json.dumps(record.to_json(), separators=(",", ":")).encode("utf-8")
            by_topic.setdefault(record.topic, []).append(payload)
        last_offsets: dict[str, int] = {}
        for topic, payloads in sorted(by_topic.items()):
            offsets = self.broker.publish_many(topic, payloads)
            last_offsets[topic] = offsets[-1]
        return last_offsets

    def receive_batch(self, raw: bytes, now_s: Optional[float] = None) -> IngestResult:
        """Validate, dedup, transform, and atomically publish one wire batch.

        Raises IngestError(400) for malformed payloads (naming the first
        offending record) and IngestError(503) when the queue is unavailable;
        neither outcome publishes anything.
        """
        try:
            batch = decode_batch(raw)
        except SchemaError as exc:
            raise IngestError(400, str(exc), exc.record_index) from exc

        if self.dedup.check_and_insert(batch.batch_id, now_s):
            return IngestResult(batch.batch_id, published=0, duplicate=True)

        try:
            transformed = self._transform(batch.records)
            offsets = self.publish_records(transformed)
        except (BrokerError, OSError) as exc:
            # the batch never made it: allow the retry to republish
            self.dedup.forget(batch.batch_id)
            raise IngestError(503, f"queue unavailable: {exc}") from exc
        return IngestResult(batch.batch_id, published=len(transformed), offsets=offsets)
