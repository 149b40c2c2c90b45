"""Embedded durable topic-partitioned log with consumer-group offsets."""

from .broker import (
    Broker,
    BrokerError,
    CorruptSegmentError,
    QueueMessage,
    UnknownGroupError,
)

__all__ = [
    "Broker",
    "BrokerError",
    "CorruptSegmentError",
    "QueueMessage",
    "UnknownGroupError",
]
