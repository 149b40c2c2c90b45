"""Durable FIFO of unacknowledged batches.

One file per batch, named by a zero-padded sequence number, so restart
recovery is a directory listing and FIFO order needs no index. Capacity
is enforced by evicting the oldest entry (newest data is the most
valuable for monitoring). If local storage fails, the batch is held in
memory and flagged volatile rather than dropped.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..records import Batch, batch_from_json


def _write_file(path: Path, data: bytes) -> None:
    path.write_bytes(data)


@dataclass
class SpoolEntry:
    seq: int
    batch: Batch
    volatile: bool = False


@dataclass
class AppendReport:
    seq: int
    volatile: bool = False
    evicted: list[Batch] = field(default_factory=list)


class SpoolBuffer:
    def __init__(self, directory: str, capacity_batches: int):
        if capacity_batches < 1:
            raise ValueError("capacity_batches must be >= 1")
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.capacity = capacity_batches
        self._lock = threading.RLock()
        self._entries: list[SpoolEntry] = []
        for path in sorted(self.dir.glob("*.batch")):
            batch = batch_from_json(json.loads(path.read_text()))
            self._entries.append(SpoolEntry(int(path.stem), batch))
        self._next_seq = self._entries[-1].seq + 1 if self._entries else 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def append(self, batch: Batch) -> AppendReport:
        """Append one batch, evicting the oldest entries beyond capacity."""
        if not batch.records:
            raise ValueError("batch must be non-empty")
        with self._lock:
            seq = self._next_seq
            self._next_seq += 1
            entry = SpoolEntry(seq, batch)
            try:
                _write_file(self._path(seq), json.dumps(batch.to_json()).encode("utf-8"))
            except OSError:
                entry.volatile = True
            self._entries.append(entry)
            report = AppendReport(seq=seq, volatile=entry.volatile)
            while len(self._entries) > self.capacity:
                report.evicted.append(self._remove(self._entries[0]))
            return report

    def peek_oldest(self) -> Batch | None:
        with self._lock:
            return self._entries[0].batch if self._entries else None

    def ack(self, batch_id: str) -> bool:
        """Remove the oldest entry iff its batch_id matches the acknowledgment."""
        with self._lock:
            if self._entries and self._entries[0].batch.batch_id == batch_id:
                self._remove(self._entries[0])
                return True
            return False

    def batches(self) -> list[Batch]:
        with self._lock:
            return [e.batch for e in self._entries]

    def _remove(self, entry: SpoolEntry) -> Batch:
        self._entries.remove(entry)
        if not entry.volatile:
            self._path(entry.seq).unlink(missing_ok=True)
        return entry.batch

    def _path(self, seq: int) -> Path:
        return self.dir / f"{seq:020d}.batch"
