"""Collection tasks: definitions, execution, output parsing.

A task is one scheduled probe: a shell command, an HTTP reachability
check, or a built-in host metric generator. Execution never raises for
operational failures; the outcome enum carries them instead so the
scheduler can keep running.
"""

from __future__ import annotations

import shutil
import subprocess
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import psutil

from ..records import Record

KINDS = ("exec", "http_probe", "builtin_metric")
PARSE_MODES = ("scalar", "lines", "raw")
BUILTIN_GENERATORS = ("cpu_load", "mem_free_bytes", "disk_free_bytes", "proc_count")

Clock = Callable[[], int]  # epoch ms


@dataclass
class CollectionTask:
    task_id: str
    kind: str
    spec: dict
    period_seconds: int
    jitter_seconds: int = 0
    timeout_ms: int = 10_000
    output_topic: str = "metrics.default"
    output_kind: str = "metric"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.period_seconds < 1:
            raise ValueError("period_seconds must be >= 1")
        if not 0 <= self.jitter_seconds < self.period_seconds:
            raise ValueError("jitter_seconds must be non-negative and < period_seconds")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if not self.output_topic:
            raise ValueError("output_topic must be non-empty")
        if self.output_kind not in ("metric", "log"):
            raise ValueError(f"unknown output_kind {self.output_kind!r}")
        if self.kind == "exec":
            if not self.spec.get("command"):
                raise ValueError("exec task needs spec.command")
            if self.spec.get("parse", "scalar") not in PARSE_MODES:
                raise ValueError(f"unknown parse mode {self.spec.get('parse')!r}")
        elif self.kind == "http_probe":
            if not self.spec.get("url"):
                raise ValueError("http_probe task needs spec.url")
        elif self.kind == "builtin_metric":
            if self.spec.get("generator") not in BUILTIN_GENERATORS:
                raise ValueError(f"unknown builtin generator {self.spec.get('generator')!r}")

    @property
    def metric_name(self) -> str:
        return self.spec.get("metric") or self.spec.get("generator") or self.task_id

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "kind": self.kind,
            "spec": dict(self.spec),
            "period_seconds": self.period_seconds,
            "jitter_seconds": self.jitter_seconds,
            "timeout_ms": self.timeout_ms,
            "output_topic": self.output_topic,
            "output_kind": self.output_kind,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CollectionTask":
        return cls(
            task_id=doc["task_id"],
            kind=doc["kind"],
            spec=dict(doc.get("spec", {})),
            period_seconds=doc["period_seconds"],
            jitter_seconds=doc.get("jitter_seconds", 0),
            timeout_ms=doc.get("timeout_ms", 10_000),
            output_topic=doc["output_topic"],
            output_kind=doc.get("output_kind", "metric"),
        )


@dataclass
class TaskResult:
    task_id: str
    server_id: str
    started_at: int
    duration_ms: int
    outcome: str  # ok | timeout | exec_error
    records: list[Record] = field(default_factory=list)


def _builtin_value(generator: str) -> float:
    if generator == "cpu_load":
        return float(psutil.getloadavg()[0])
    if generator == "mem_free_bytes":
        return float(psutil.virtual_memory().available)
    if generator == "disk_free_bytes":
        return float(shutil.disk_usage("/").free)
    if generator == "proc_count":
        return float(len(psutil.pids()))
    raise ValueError(generator)


def run_task(task: CollectionTask, clock: Clock, server_id: str) -> TaskResult:
    """Execute one task and parse its output into wire records."""
    started_at = clock()
    t0 = time.monotonic()
    tags = dict(task.spec.get("tags", {}))

    def elapsed_ms() -> int:
        return int((time.monotonic() - t0) * 1000)

    def result(outcome: str, records: list[Record], duration: Optional[int] = None) -> TaskResult:
        return TaskResult(task.task_id, server_id, started_at,
                          elapsed_ms() if duration is None else duration, outcome, records)

    def error_log(message: str) -> Record:
        return Record.log(task.output_topic, server_id, task.task_id, clock(),
                          "ERROR", message, tags)

    if task.kind == "builtin_metric":
        value = _builtin_value(task.spec["generator"])
        record = Record.metric(task.output_topic, server_id, task.metric_name,
                               clock(), value, tags)
        return result("ok", [record])

    if task.kind == "http_probe":
        import requests

        url = task.spec["url"]
        method = task.spec.get("method", "GET")
        probe_start = time.monotonic()
        try:
            requests.request(method, url, timeout=task.timeout_ms / 1000)
            reachable = 1.0
        except requests.RequestException:
            reachable = 0.0
        latency_ms = (time.monotonic() - probe_start) * 1000
        base = task.metric_name
        ts = clock()
        return result("ok", [
            Record.metric(task.output_topic, server_id, f"{base}.reachable", ts, reachable, tags),
            Record.metric(task.output_topic, server_id, f"{base}.latency_ms", ts, latency_ms, tags),
        ])

    # exec
    try:
        proc = subprocess.run(task.spec["command"], shell=True, capture_output=True,
                              text=True, timeout=task.timeout_ms / 1000)
    except subprocess.TimeoutExpired:
        return result("timeout", [], duration=max(elapsed_ms(), task.timeout_ms))
    if proc.returncode != 0:
        stderr = proc.stderr.strip() or f"exit status {proc.returncode}"
        return result("exec_error", [error_log(stderr)])

    parse = task.spec.get("parse", "scalar")
    ts = clock()
    if parse == "scalar":
        text = proc.stdout.strip()
        try:
            value = float(text)
        except ValueError:
            return result("exec_error", [error_log(f"scalar parse failure: {text!r}")])
        return result("ok", [Record.metric(task.output_topic, server_id,
                                           task.metric_name, ts, value, tags)])
    if parse == "lines":
        records = [
            Record.log(task.output_topic, server_id, task.task_id, ts,
                       task.spec.get("level", "INFO"), line, tags)
            for line in proc.stdout.splitlines() if line.strip()
        ]
        return result("ok", records)
    # raw
    if not proc.stdout:
        return result("ok", [])
    return result("ok", [Record.log(task.output_topic, server_id, task.task_id, ts,
                                    task.spec.get("level", "INFO"), proc.stdout, tags)])
