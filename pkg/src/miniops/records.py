"""Record kinds flowing through the pipeline, and the batch wire schema.

Two record kinds exist end to end: a series-keyed numeric sample
(:class:`MetricPoint`) and a structured text event (:class:`LogEvent`).
On the wire, both travel inside a :class:`Batch` as flat JSON objects
tagged with their destination topic; see :func:`validate_record` for the
exact schema. Agents produce batches, the ingester validates them, and
the store consumes them back into typed points and events.
"""

from __future__ import annotations

import gzip
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional


class SchemaError(ValueError):
    """A batch or record violates the wire schema.

    ``record_index`` is the position of the first offending record, or None
    when the envelope itself is malformed.
    """

    def __init__(self, message: str, record_index: Optional[int] = None):
        super().__init__(message)
        self.record_index = record_index


@dataclass(frozen=True)
class SeriesKey:
    """Canonical identity of a metric stream: name plus sorted tag pairs.

    Two keys are equal iff their canonical forms are equal. The ``server``
    tag is mandatory for points entering the store; that is enforced at
    write time, not here, so intermediate code can build partial keys.
    """

    name: str
    tags: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.tags, key=lambda kv: kv[0]))
        object.__setattr__(self, "tags", ordered)

    @classmethod
    def of(cls, name: str, **tags: str) -> "SeriesKey":
        return cls(name, tuple(tags.items()))

    @property
    def canonical(self) -> str:
        parts = [self.name]
        parts.extend(f"{k}={v}" for k, v in self.tags)
        return ",".join(parts)

    def tag(self, key: str) -> Optional[str]:
        for k, v in self.tags:
            if k == key:
                return v
        return None

    def __str__(self) -> str:
        return self.canonical


@dataclass(frozen=True)
class MetricPoint:
    series: SeriesKey
    ts: int
    value: float

    def validate(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for {self.series}: {self.value!r}")


@dataclass(frozen=True)
class LogEvent:
    ts: int
    server: str
    level: str
    message: str
    fields: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.message:
            raise ValueError("log event message must be non-empty")


@dataclass
class Record:
    """One wire record inside a batch: a metric sample or a log line."""

    topic: str
    kind: str  # "metric" | "log"
    server: str
    name: str
    ts: int
    value: Optional[float] = None
    level: Optional[str] = None
    message: Optional[str] = None
    tags: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "topic": self.topic,
            "kind": self.kind,
            "server": self.server,
            "name": self.name,
            "ts": self.ts,
            "tags": dict(self.tags),
        }
        if self.kind == "metric":
            doc["value"] = self.value
        else:
            doc["level"] = self.level
            doc["message"] = self.message
        return doc

    def to_point(self) -> MetricPoint:
        tags = dict(self.tags)
        tags["server"] = self.server
        return MetricPoint(SeriesKey(self.name, tuple(tags.items())), self.ts, float(self.value))

    def to_event(self) -> LogEvent:
        return LogEvent(self.ts, self.server, self.level or "", self.message or "", tuple(self.tags.items()))

    @classmethod
    def metric(cls, topic: str, server: str, name: str, ts: int, value: float,
               tags: Optional[dict[str, str]] = None) -> "Record":
        return cls(topic, "metric", server, name, ts, value=float(value), tags=dict(tags or {}))

    @classmethod
    def log(cls, topic: str, server: str, name: str, ts: int, level: str, message: str,
            tags: Optional[dict[str, str]] = None) -> "Record":
        return cls(topic, "log", server, name, ts, level=level, message=message, tags=dict(tags or {}))


@dataclass
class Batch:
    """Transmission and compression unit: agent-unique id plus records."""

    batch_id: str
    agent_id: str
    sent_at: int
    records: list[Record]

    def to_json(self) -> dict[str, Any]:
        return {
            "batch_id": self.batch_id,
            "agent_id": self.agent_id,
            "sent_at": self.sent_at,
            "records": [r.to_json() for r in self.records],
        }

    def encode(self) -> bytes:
        """Serialize to the wire form: gzip-compressed UTF-8 JSON."""
        raw = json.dumps(self.to_json(), separators=(",", ":")).encode("utf-8")
        return gzip.compress(raw)


def validate_record(doc: Any, index: int) -> Record:
    """Validate one wire record document and return the typed Record.

    Raises SchemaError naming ``index`` on the first violation found.
    """
    def bad(msg: str) -> SchemaError:
        return SchemaError(f"record {index}: {msg}", record_index=index)

    if not isinstance(doc, dict):
        raise bad("not an object")
    for key in ("topic", "kind", "server", "name"):
        if not isinstance(doc.get(key), str) or not doc[key]:
            raise bad(f"missing or empty field {key!r}")
    if not isinstance(doc.get("ts"), int) or isinstance(doc.get("ts"), bool):
        raise bad("missing integer field 'ts'")
    tags = doc.get("tags", {})
    if not isinstance(tags, dict) or any(
        not isinstance(k, str) or not isinstance(v, str) for k, v in tags.items()
    ):
        raise bad("field 'tags' must map strings to strings")

    kind = doc["kind"]
    if kind == "metric":
        value = doc.get("value")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise bad("metric record missing numeric field 'value'")
        if not math.isfinite(float(value)):
            raise bad("metric value must be finite")
        return Record.metric(doc["topic"], doc["server"], doc["name"], doc["ts"],
                             float(value), tags)
    if kind == "log":
        level = doc.get("level")
        message = doc.get("message")
        if not isinstance(level, str):
            raise bad("log record missing string field 'level'")
        if not isinstance(message, str) or not message:
            raise bad("log record missing non-empty field 'message'")
        return Record.log(doc["topic"], doc["server"], doc["name"], doc["ts"],
                          level, message, tags)
    raise bad(f"unknown kind {kind!r}")


def decode_batch(payload: bytes) -> Batch:
    """Decode and validate a wire batch (gzip JSON) into typed form.

    Raises SchemaError on bad compression, bad JSON, a malformed envelope,
    or (with the record index) the first invalid record.
    """
    try:
        raw = gzip.decompress(payload)
    except (OSError, EOFError) as exc:
        raise SchemaError(f"payload is not valid gzip: {exc}")
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"payload is not valid JSON: {exc}")
    return batch_from_json(doc)


def batch_from_json(doc: Any) -> Batch:
    if not isinstance(doc, dict):
        raise SchemaError("batch must be a JSON object")
    for key in ("batch_id", "agent_id"):
        if not isinstance(doc.get(key), str) or not doc[key]:
            raise SchemaError(f"batch missing string field {key!r}")
    if not isinstance(doc.get("sent_at"), int):
        raise SchemaError("batch missing integer field 'sent_at'")
    records_doc = doc.get("records")
    if not isinstance(records_doc, list) or not records_doc:
        raise SchemaError("batch must carry a non-empty 'records' list")
    records = [validate_record(r, i) for i, r in enumerate(records_doc)]
    return Batch(doc["batch_id"], doc["agent_id"], doc["sent_at"], records)


def records_to_json_lines(records: Iterable[Record]) -> str:
    return "\n".join(json.dumps(r.to_json(), sort_keys=True, separators=(",", ":")) for r in records)
