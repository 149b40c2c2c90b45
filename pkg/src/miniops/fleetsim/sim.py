"""Scenario runner: in-process agents over real loopback HTTP.

Agents reuse the production pieces (scheduler, spool, flusher, gzip
transport) driven by a virtual clock, so the wire formats and retry
machinery are exercised for real while 10-minute cadences compress into
seconds. The runner keeps a ground-truth ledger of every record produced
and reconciles it against the store at the end.
"""

from __future__ import annotations

import hashlib
import json
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests

from ..agent.scheduler import TaskScheduler, VersionedTaskSet, schedule_tick
from ..agent.spool import SpoolBuffer
from ..agent.tasks import CollectionTask
from ..agent.transport import Flusher, IngesterClient
from ..records import Batch, Record
from .scenario import Generator, Scenario


@dataclass
class SimReport:
    produced: int = 0
    stored: int = 0
    evicted_records: int = 0
    delivered_batches: int = 0
    volatile_batches: int = 0
    ledger_sha256: str = ""
    wall_clock_s: float = 0.0
    metrics: list[str] = field(default_factory=list)

    @property
    def reconciled(self) -> bool:
        return self.stored == self.produced - self.evicted_records

    def to_json(self) -> dict:
        return {
            "produced": self.produced,
            "stored": self.stored,
            "evicted_records": self.evicted_records,
            "delivered_batches": self.delivered_batches,
            "ledger_sha256": self.ledger_sha256,
            "wall_clock_s": round(self.wall_clock_s, 3),
            "reconciled": self.reconciled,
            "metrics": self.metrics,
        }


class _SimAgent:
    """One simulated server: scheduler-driven generators, spool, flusher."""

    def __init__(self, server_id: str, server_idx: int, scenario: Scenario,
                 spool_dir: Path, ingester_url: str, headers: dict):
        self.server_id = server_id
        self.scenario = scenario
        self.generators = [Generator(spec, scenario.seed, server_idx, gen_idx)
                           for gen_idx, spec in enumerate(scenario.generators)]
        self.scheduler = TaskScheduler(server_id)
        period_s = max(1, scenario.tick_interval_ms // 1000)
        tasks = [CollectionTask(f"gen-{i}", "builtin_metric",
                                {"generator": "proc_count"},
                                period_seconds=period_s,
                                output_topic=scenario.topic)
                 for i in range(len(scenario.generators))]
        self.scheduler.apply_config(VersionedTaskSet(1, tasks))
        self.spool = SpoolBuffer(spool_dir / server_id, scenario.spool_capacity)
        client = IngesterClient(ingester_url, timeout_s=10)
        client.session.headers.update(headers)
        self.flusher = Flusher(self.spool, client)
        self.batch_seq = 0
        self.evicted: list[Batch] = []
        self.delivered = 0
        self.volatile = 0

    def generate(self, now_ms: int) -> list[Record]:
        """Produce one record per due generator task at virtual time now."""
        due = schedule_tick(self.scheduler, now_ms)
        t_rel = now_ms - self.scenario.t0_ms
        records = []
        for task in due:
            gen_idx = int(task.task_id.split("-", 1)[1])
            generator = self.generators[gen_idx]
            records.append(Record.metric(
                self.scenario.topic, self.server_id, generator.spec.metric,
                now_ms, generator.value_at(t_rel)))
        return records

    def enqueue(self, records: list[Record], now_ms: int) -> None:
        if not records:
            return
        self.batch_seq += 1
        batch = Batch(f"{self.server_id}-{self.batch_seq:08d}", self.server_id,
                      now_ms, records)
        report = self.spool.append(batch)
        self.evicted.extend(report.evicted)
        if report.volatile:
            self.volatile += 1

    def flush(self, now_ms: int) -> None:
        report = self.flusher.flush(now_ms)
        self.delivered += len(report.delivered)


class PipelineClient:
    """HTTP access to the pipeline for the runner itself."""

    def __init__(self, base_url: str, token: str = "", api_prefix: str = "/v1"):
        self.base = base_url.rstrip("/")
        self.prefix = api_prefix
        self.session = requests.Session()
        if token:
            self.session.headers["Authorization"] = f"Bearer {token}"

    def url(self, path: str) -> str:
        return f"{self.base}{self.prefix}{path}"

    def reachable(self) -> bool:
        try:
            return self.session.get(self.url("/health"), timeout=5).ok
        except requests.RequestException:
            return False

    def set_ingester_fault(self, down: bool) -> None:
        self.session.post(self.url("/admin/fault"),
                          json={"ingester_down": down}, timeout=10).raise_for_status()

    def pump_lag(self, prefixes=("metrics.", "logs."), group: str = "tsstore") -> int:
        stats = self.session.get(self.url("/queue/health"), timeout=10).json()
        lag = 0
        for topic, topic_stats in stats.items():
            if topic.startswith(tuple(prefixes)):
                lag += topic_stats["head"] - topic_stats["groups"].get(group, 0)
        return lag

    def count_points(self, metric: str, from_ms: int, to_ms: int) -> int:
        resp = self.session.post(self.url("/query"), json={
            "sql": f'SELECT count(value) FROM "{metric}" WHERE ts >= {from_ms} AND ts < {to_ms}'},
            timeout=30)
        resp.raise_for_status()
        rows = resp.json()["rows"]
        return int(rows[0][-1]) if rows else 0


def run_scenario(scenario: Scenario, base_url: str, token: str = "",
                 api_prefix: str = "/v1", accel: Optional[float] = None,
                 spool_root: Optional[str] = None,
                 drain_timeout_s: float = 120.0) -> tuple[SimReport, list[dict]]:
    """Drive the scenario against a running pipeline; reconcile at the end.

    Returns the report plus the ground-truth ledger, one entry per record
    produced: {"server", "metric", "ts", "value"}.
    """
    client = PipelineClient(base_url, token, api_prefix)
    if not client.reachable():
        raise RuntimeError(f"pipeline unreachable at {base_url}; aborting before producing")

    started = time.monotonic()
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    ingest_base = base_url.rstrip("/")
    tmp_holder = None
    if spool_root is None:
        tmp_holder = tempfile.TemporaryDirectory(prefix="fleetsim-spool-")
        spool_root = tmp_holder.name

    agents = [
        _SimAgent(server_id, idx, scenario, Path(spool_root), ingest_base, headers)
        for idx, server_id in enumerate(scenario.server_ids())
    ]
    # the transport posts to {base}/v1/batch; route through the prefix instead
    for agent in agents:
        agent.flusher.transport.base_url = ingest_base
        agent.flusher.transport.path = f"{api_prefix}/batch"

    ledger: list[dict] = []
    outage_active = False
    try:
        for tick in range(scenario.duration_ticks):
            now = scenario.t0_ms + tick * scenario.tick_interval_ms
            t_rel = now - scenario.t0_ms

            want_outage = any(f.kind == "ingester_outage" and f.active(t_rel)
                              for f in scenario.faults)
            if want_outage != outage_active:
                client.set_ingester_fault(want_outage)
                outage_active = want_outage

            paused = {
                agent.server_id
                for agent in agents
                for f in scenario.faults
                if f.kind == "agent_pause" and f.active(t_rel)
                and f.applies_to(agent.server_id)
            }
            for agent in agents:
                if agent.server_id in paused:
                    continue
                records = agent.generate(now)
                for record in records:
                    ledger.append({"server": record.server, "metric": record.name,
                                   "ts": record.ts, "value": record.value})
                agent.enqueue(records, now)
                agent.flush(now)
            if accel:
                time.sleep(scenario.tick_interval_ms / 1000.0 / accel)

        if outage_active:
            client.set_ingester_fault(False)

        # final drain: keep advancing virtual time so backoff gates expire
        drain_now = scenario.t0_ms + scenario.duration_ms
        for _ in range(200):
            if all(len(agent.spool) == 0 for agent in agents):
                break
            for agent in agents:
                agent.flush(drain_now)
            drain_now += scenario.tick_interval_ms

        # wait (real time) for the store consumer to catch up
        deadline = time.monotonic() + drain_timeout_s
        while time.monotonic() < deadline:
            if client.pump_lag() == 0:
                break
            time.sleep(0.05)
        else:
            raise TimeoutError("store consumer lag did not reach zero")
    finally:
        if outage_active:
            client.set_ingester_fault(False)

    report = SimReport()
    report.produced = len(ledger)
    report.evicted_records = sum(len(b.records) for a in agents for b in a.evicted)
    report.delivered_batches = sum(a.delivered for a in agents)
    report.volatile_batches = sum(a.volatile for a in agents)
    report.metrics = sorted({g.metric for g in scenario.generators})
    to_ms = scenario.t0_ms + scenario.duration_ms + 1
    report.stored = sum(client.count_points(metric, scenario.t0_ms, to_ms)
                        for metric in report.metrics)
    canonical = json.dumps(sorted(ledger, key=lambda e: (e["server"], e["metric"], e["ts"])),
                           sort_keys=True, separators=(",", ":"))
    report.ledger_sha256 = hashlib.sha256(canonical.encode()).hexdigest()
    report.wall_clock_s = time.monotonic() - started
    if tmp_holder is not None:
        tmp_holder.cleanup()
    return report, ledger
