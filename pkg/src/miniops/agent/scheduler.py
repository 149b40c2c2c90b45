"""Task scheduling: periodic due calculation and versioned config swaps.

The jitter offset is a stable hash of (agent_id, task_id), not a random
draw, so reruns are deterministic and the fleet spreads load without
coordination. A task is due when

    now >= last_fire + period_seconds * 1000 + jitter_offset_ms

and new tasks fire on their first tick.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional

from .tasks import CollectionTask


def jitter_offset_ms(agent_id: str, task_id: str, jitter_seconds: int) -> int:
    if jitter_seconds <= 0:
        return 0
    digest = zlib.crc32(f"{agent_id}/{task_id}".encode("utf-8"))
    return (digest % jitter_seconds) * 1000


@dataclass
class VersionedTaskSet:
    version: int
    tasks: list[CollectionTask]

    def to_json(self) -> dict:
        return {"version": self.version, "tasks": [t.to_json() for t in self.tasks]}

    @classmethod
    def from_json(cls, doc: dict) -> "VersionedTaskSet":
        return cls(int(doc["version"]), [CollectionTask.from_json(t) for t in doc["tasks"]])


@dataclass
class ConfigReport:
    applied: bool
    version: int
    added: list[str] = field(default_factory=list)
    removed: list[str] = field(default_factory=list)


class TaskScheduler:
    """Owns the agent's task set, config version, and per-task fire state."""

    def __init__(self, agent_id: str):
        self.agent_id = agent_id
        self.version = 0
        self.tasks: dict[str, CollectionTask] = {}
        self.last_fire: dict[str, int] = {}
        self.running: set[str] = set()

    def apply_config(self, incoming: VersionedTaskSet) -> ConfigReport:
        """Swap in a task set iff its version is newer; keep schedule state.

        Unchanged and changed-but-retained tasks keep their last-fire time
        (a period change takes effect relative to the original last fire);
        removed tasks stop being scheduled and forget their state.
        """
        if incoming.version <= self.version:
            return ConfigReport(applied=False, version=self.version)
        new_ids = {t.task_id for t in incoming.tasks}
        old_ids = set(self.tasks)
        for removed in old_ids - new_ids:
            self.last_fire.pop(removed, None)
        report = ConfigReport(
            applied=True,
            version=incoming.version,
            added=sorted(new_ids - old_ids),
            removed=sorted(old_ids - new_ids),
        )
        self.tasks = {t.task_id: t for t in incoming.tasks}
        self.version = incoming.version
        return report

    def due(self, now: int) -> list[CollectionTask]:
        """Tasks due at ``now``, excluding still-running ones (skip-if-running)."""
        out = []
        for task_id, task in self.tasks.items():
            if task_id in self.running:
                continue
            last = self.last_fire.get(task_id)
            if last is None:
                out.append(task)
                continue
            offset = jitter_offset_ms(self.agent_id, task_id, task.jitter_seconds)
            if now >= last + task.period_seconds * 1000 + offset:
                out.append(task)
        return out

    def mark_fired(self, task_id: str, now: int) -> None:
        self.last_fire[task_id] = now

    def mark_running(self, task_id: str) -> None:
        self.running.add(task_id)

    def mark_done(self, task_id: str) -> None:
        self.running.discard(task_id)


def schedule_tick(scheduler: TaskScheduler, now: int) -> list[CollectionTask]:
    """One scheduler tick: return due tasks and record their fire time."""
    due = scheduler.due(now)
    for task in due:
        scheduler.mark_fired(task.task_id, now)
    return due
