"""The agent daemon loop: poll config, run due tasks, spool, deliver.

Task executions run concurrently across distinct tasks and serially per
task (skip-if-running). The spool has one appender (this loop) and one
drainer (the flusher), both called from the same loop here; fleetsim
drives the same pieces with a virtual clock instead.
"""

from __future__ import annotations

import logging
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import requests

from ..records import Batch, Record
from .scheduler import TaskScheduler, VersionedTaskSet, schedule_tick
from .spool import SpoolBuffer
from .tasks import TaskResult, run_task
from .transport import Flusher, IngesterClient

logger = logging.getLogger(__name__)


@dataclass
class AgentConfig:
    agent_id: str
    controlplane_url: str
    ingester_url: str
    spool_dir: str
    spool_capacity: int = 100
    tick_s: float = 1.0
    config_poll_s: float = 60.0


class AgentDaemon:
    def __init__(self, config: AgentConfig):
        self.config = config
        self.scheduler = TaskScheduler(config.agent_id)
        self.spool = SpoolBuffer(config.spool_dir, config.spool_capacity)
        self.flusher = Flusher(self.spool, IngesterClient(config.ingester_url))
        self._session = requests.Session()
        self._pool = ThreadPoolExecutor(max_workers=8, thread_name_prefix="task")
        self._stop = threading.Event()
        self._last_config_poll = 0.0

    # -- config ------------------------------------------------------------

    def poll_config(self) -> bool:
        url = (f"{self.config.controlplane_url.rstrip('/')}"
               f"/v1/agents/{self.config.agent_id}/tasks")
        try:
            resp = self._session.get(url, timeout=10)
            resp.raise_for_status()
        except requests.RequestException as exc:
            logger.warning("config poll failed: %s", exc)
            return False
        report = self.scheduler.apply_config(VersionedTaskSet.from_json(resp.json()))
        if report.applied:
            logger.info("applied config v%d (+%s -%s)", report.version,
                        report.added, report.removed)
        return report.applied

    # -- task execution ------------------------------------------------------

    def _now_ms(self) -> int:
        return int(time.time() * 1000)

    def _execute(self, task) -> None:
        try:
            result = run_task(task, self._now_ms, self.config.agent_id)
            self._handle_result(result)
        finally:
            self.scheduler.mark_done(task.task_id)

    def _handle_result(self, result: TaskResult) -> None:
        if result.records:
            batch = Batch(uuid.uuid4().hex, self.config.agent_id,
                          self._now_ms(), list(result.records))
            report = self.spool.append(batch)
            if report.evicted:
                logger.warning("spool full: evicted %d batch(es)", len(report.evicted))
        self._report_execution(result)

    def _report_execution(self, result: TaskResult) -> None:
        url = f"{self.config.controlplane_url.rstrip('/')}/v1/executions"
        doc = {
            "task_id": result.task_id,
            "server_id": result.server_id,
            "started_at": result.started_at,
            "outcome": result.outcome,
            "duration_ms": result.duration_ms,
        }
        try:
            self._session.post(url, json=doc, timeout=5)
        except requests.RequestException:
            pass  # execution logs are best-effort

    # -- main loop -----------------------------------------------------------

    def run_once(self, now_ms: Optional[int] = None) -> None:
        now = self._now_ms() if now_ms is None else now_ms
        if time.time() - self._last_config_poll >= self.config.config_poll_s:
            self._last_config_poll = time.time()
            self.poll_config()
        for task in schedule_tick(self.scheduler, now):
            self.scheduler.mark_running(task.task_id)
            self._pool.submit(self._execute, task)
        self.flusher.flush(now)

    def run_forever(self) -> None:
        logger.info("agent %s starting", self.config.agent_id)
        while not self._stop.is_set():
            self.run_once()
            self._stop.wait(self.config.tick_s)

    def stop(self) -> None:
        self._stop.set()
        self._pool.shutdown(wait=True)
