"""Columnar time-series store, log-event store, metadata KV, mini-SQL."""

from .sql import ParseError, Query, parse_query, print_query
from .store import LogStore, MetadataStore, MetricStore

__all__ = [
    "LogStore",
    "MetadataStore",
    "MetricStore",
    "ParseError",
    "Query",
    "parse_query",
    "print_query",
]
