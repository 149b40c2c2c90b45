"""Built-in transform hooks: tag enrichment and value drop-filters.

Hooks are in-process plugins wired at startup from configuration; there is
no hot code loading. These two cover the common cases and double as the
reference hooks in the test suite.
"""

from __future__ import annotations

from typing import Optional

from ..records import Record
from .service import TransformHook


def tag_enrichment(hook_id: str, topic: str, extra_tags: dict[str, str],
                   retopic: Optional[str] = None) -> TransformHook:
    """Add fixed tags to every record, optionally re-routing to a new topic."""

    def fn(records: list[Record]) -> list[Record]:
        out = []
        for r in records:
            tags = dict(r.tags)
            tags.update(extra_tags)
            out.append(Record(retopic or r.topic, r.kind, r.server, r.name, r.ts,
                              value=r.value, level=r.level, message=r.message, tags=tags))
        return out

    return TransformHook(hook_id, topic, fn)


def drop_below(hook_id: str, topic: str, minimum: float) -> TransformHook:
    """Drop metric records whose value is below ``minimum``; logs pass through."""

    def fn(records: list[Record]) -> list[Record]:
        return [r for r in records if r.kind != "metric" or r.value >= minimum]

    return TransformHook(hook_id, topic, fn)
