"""Batch ingestion: validation, dedup, transform hooks, queue publication."""

from .hooks import drop_below, tag_enrichment
from .service import DedupWindow, Ingester, IngestError, IngestResult, TransformHook

__all__ = [
    "DedupWindow",
    "Ingester",
    "IngestError",
    "IngestResult",
    "TransformHook",
    "drop_below",
    "tag_enrichment",
]
