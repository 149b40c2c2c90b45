"""Delivery to the ingester: gzip HTTP transport and spool draining.

Batches leave the spool oldest-first and are removed only when the
ingester acknowledges their batch_id. A failed send gates the whole spool
behind exponential backoff (base 1 s, factor 2, cap 60 s): head-of-line
blocking is deliberate, it preserves delivery order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import requests

from ..records import Batch
from .spool import SpoolBuffer


class TransportError(Exception):
    pass


class BatchTransport(Protocol):
    def send(self, batch: Batch) -> str:
        """Deliver one batch; return the acknowledged batch_id."""


@dataclass
class BackoffPolicy:
    base_s: float = 1.0
    factor: float = 2.0
    cap_s: float = 60.0

    def delay_ms(self, consecutive_failures: int) -> int:
        if consecutive_failures <= 0:
            return 0
        delay = self.base_s * self.factor ** (consecutive_failures - 1)
        return int(min(delay, self.cap_s) * 1000)


class IngesterClient:
    """HTTP transport: POST /v1/batch with Content-Encoding: gzip."""

    def __init__(self, base_url: str, timeout_s: float = 10.0,
                 session: Optional[requests.Session] = None,
                 path: str = "/v1/batch"):
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_s
        self.session = session or requests.Session()
        self.path = path

    def send(self, batch: Batch) -> str:
        try:
            resp = self.session.post(
                f"{self.base_url}{self.path}",
                data=batch.encode(),
                headers={"Content-Type": "application/json",
                         "Content-Encoding": "gzip"},
                timeout=self.timeout_s,
            )
        except requests.RequestException as exc:
            raise TransportError(f"ingester unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"ingester returned {resp.status_code}: {resp.text[:200]}")
        acked = resp.json().get("acked")
        if acked != batch.batch_id:
            raise TransportError(f"ack mismatch: sent {batch.batch_id}, got {acked!r}")
        return acked


@dataclass
class FlushReport:
    delivered: list[str] = field(default_factory=list)
    attempts: int = 0
    remaining: int = 0
    next_attempt_at: Optional[int] = None


class Flusher:
    """Drains a spool through a transport under the backoff policy."""

    def __init__(self, spool: SpoolBuffer, transport: BatchTransport,
                 backoff: Optional[BackoffPolicy] = None):
        self.spool = spool
        self.transport = transport
        self.backoff = backoff or BackoffPolicy()
        self.failures = 0
        self.gate_until: int = 0  # epoch ms; no sends before this

    def flush(self, now: int) -> FlushReport:
        """Send spooled batches oldest-first until empty, failure, or gate."""
        report = FlushReport()
        while True:
            if now < self.gate_until:
                break
            batch = self.spool.peek_oldest()
            if batch is None:
                break
            report.attempts += 1
            try:
                acked = self.transport.send(batch)
            except TransportError:
                self.failures += 1
                self.gate_until = now + self.backoff.delay_ms(self.failures)
                break
            self.failures = 0
            self.gate_until = 0
            self.spool.ack(acked)
            report.delivered.append(acked)
        report.remaining = len(self.spool)
        report.next_attempt_at = self.gate_until if self.failures else None
        return report
