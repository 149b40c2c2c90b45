"""Server registry, task templates, target selectors, execution logs.

Define a collection task once, target a fleet subset with a selector, and
every matching agent picks it up on its next config poll. Each agent has
a strictly increasing config version; the version bumps exactly when the
agent's compiled task set changes (plan, unplan, or a registration that
changes selector membership).

All state lives in the metadata store, so the control plane survives
restarts and compile_config is a pure function of (registry, templates,
version counters).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from ..agent.scheduler import VersionedTaskSet
from ..agent.tasks import CollectionTask
from ..tsstore.store import MetadataStore

_SCALAR_FIELDS = ("server_id", "client_name", "role")
_OPS = ("eq", "neq", "in")


class ControlPlaneError(Exception):
    pass


@dataclass
class ServerDescriptor:
    server_id: str
    client_name: str
    role: str
    tags: dict[str, str] = field(default_factory=dict)
    last_seen: int = 0

    def __post_init__(self):
        if not self.server_id:
            raise ControlPlaneError("server_id must be non-empty")
        if not self.role:
            raise ControlPlaneError("role must be non-empty")

    def to_json(self) -> dict:
        return {"server_id": self.server_id, "client_name": self.client_name,
                "role": self.role, "tags": dict(self.tags), "last_seen": self.last_seen}

    @classmethod
    def from_json(cls, doc: dict) -> "ServerDescriptor":
        return cls(doc["server_id"], doc.get("client_name", ""), doc["role"],
                   dict(doc.get("tags", {})), doc.get("last_seen", 0))


@dataclass(frozen=True)
class TargetSelector:
    """Conjunction of attribute predicates; empty matches every server."""

    predicates: tuple[tuple[str, str, object], ...] = ()  # (field, op, value)

    def __post_init__(self):
        for fld, op, value in self.predicates:
            if op not in _OPS:
                raise ControlPlaneError(f"unknown selector op {op!r}")
            if fld not in _SCALAR_FIELDS and not fld.startswith("tags."):
                raise ControlPlaneError(f"unknown selector field {fld!r}")
            if op == "in" and not isinstance(value, (list, tuple)):
                raise ControlPlaneError("'in' predicate needs a list value")

    def matches(self, server: ServerDescriptor) -> bool:
        for fld, op, value in self.predicates:
            if fld.startswith("tags."):
                actual = server.tags.get(fld[len("tags."):])
            else:
                actual = getattr(server, fld)
            if op == "eq" and actual != value:
                return False
            if op == "neq" and actual == value:
                return False
            if op == "in" and actual not in value:
                return False
        return True

    def to_json(self) -> list:
        return [[f, o, list(v) if isinstance(v, (list, tuple)) else v]
                for f, o, v in self.predicates]

    @classmethod
    def from_json(cls, doc: list) -> "TargetSelector":
        return cls(tuple((f, o, tuple(v) if isinstance(v, list) else v) for f, o, v in doc))


@dataclass
class TaskTemplate:
    template_id: str
    task: CollectionTask
    selector: TargetSelector = TargetSelector()
    enabled: bool = True
    created_at: int = 0
    updated_at: int = 0

    def to_json(self) -> dict:
        return {"template_id": self.template_id, "task": self.task.to_json(),
                "selector": self.selector.to_json(), "enabled": self.enabled,
                "created_at": self.created_at, "updated_at": self.updated_at}

    @classmethod
    def from_json(cls, doc: dict) -> "TaskTemplate":
        return cls(doc["template_id"], CollectionTask.from_json(doc["task"]),
                   TargetSelector.from_json(doc.get("selector", [])),
                   doc.get("enabled", True), doc.get("created_at", 0),
                   doc.get("updated_at", 0))


@dataclass
class ExecutionLog:
    task_id: str
    server_id: str
    started_at: int
    outcome: str
    duration_ms: int

    def to_json(self) -> dict:
        return {"task_id": self.task_id, "server_id": self.server_id,
                "started_at": self.started_at, "outcome": self.outcome,
                "duration_ms": self.duration_ms}

    @classmethod
    def from_json(cls, doc: dict) -> "ExecutionLog":
        return cls(doc["task_id"], doc["server_id"], doc["started_at"],
                   doc["outcome"], doc["duration_ms"])


class ControlPlane:
    def __init__(self, meta: MetadataStore):
        self.meta = meta
        self._lock = threading.RLock()  # single-writer commit point
        self._executions: list[ExecutionLog] = [
            ExecutionLog.from_json(doc) for _, doc in
            sorted(self.meta.items("executions").items(), key=lambda kv: int(kv[0]))
        ]

    # -- registry -----------------------------------------------------------

    def register_agent(self, desc: ServerDescriptor, now: Optional[int] = None) -> dict:
        """Upsert a server; bump its config version iff its task set changed."""
        with self._lock:
            desc.last_seen = now if now is not None else int(time.time() * 1000)
            previous = self.meta.get("servers", desc.server_id)
            before = None
            if previous is not None:
                before = self._matching_template_ids(ServerDescriptor.from_json(previous))
            self.meta.put("servers", desc.server_id, desc.to_json())
            after = self._matching_template_ids(desc)
            if before is None:
                self._set_version(desc.server_id, 1)
            elif before != after:
                self._bump_version(desc.server_id)
            return {"server_id": desc.server_id, "version": self._version(desc.server_id)}

    def servers(self) -> list[ServerDescriptor]:
        return [ServerDescriptor.from_json(doc) for doc in self.meta.items("servers").values()]

    def get_server(self, server_id: str) -> Optional[ServerDescriptor]:
        doc = self.meta.get("servers", server_id)
        return None if doc is None else ServerDescriptor.from_json(doc)

    # -- versions -------------------------------------------------------------

    def _version(self, server_id: str) -> int:
        return int(self.meta.get("versions", server_id, 0))

    def _set_version(self, server_id: str, version: int) -> None:
        self.meta.put("versions", server_id, version)

    def _bump_version(self, server_id: str) -> None:
        self._set_version(server_id, self._version(server_id) + 1)

    # -- templates --------------------------------------------------------------

    def templates(self) -> list[TaskTemplate]:
        return sorted((TaskTemplate.from_json(d) for d in self.meta.items("templates").values()),
                      key=lambda t: t.template_id)

    def _matching_template_ids(self, server: ServerDescriptor) -> set[str]:
        return {t.template_id for t in self.templates()
                if t.enabled and t.selector.matches(server)}

    def plan_task(self, template: TaskTemplate, now: Optional[int] = None) -> int:
        """Store an enabled template; returns the count of affected agents."""
        with self._lock:
            existing = self.meta.get("templates", template.template_id)
            if existing is not None and TaskTemplate.from_json(existing).enabled:
                raise ControlPlaneError(f"template {template.template_id!r} already planned")
            template.enabled = True
            stamp = now if now is not None else int(time.time() * 1000)
            template.created_at = template.created_at or stamp
            template.updated_at = stamp
            self.meta.put("templates", template.template_id, template.to_json())
            affected = [s for s in self.servers() if template.selector.matches(s)]
            for server in affected:
                self._bump_version(server.server_id)
            return len(affected)

    def unplan_task(self, template_id: str, now: Optional[int] = None) -> int:
        """Disable a template; matching agents drop it at their next poll."""
        with self._lock:
            doc = self.meta.get("templates", template_id)
            if doc is None:
                raise ControlPlaneError(f"unknown template {template_id!r}")
            template = TaskTemplate.from_json(doc)
            if not template.enabled:
                raise ControlPlaneError(f"template {template_id!r} already disabled")
            template.enabled = False
            template.updated_at = now if now is not None else int(time.time() * 1000)
            self.meta.put("templates", template_id, template.to_json())
            affected = [s for s in self.servers() if template.selector.matches(s)]
            for server in affected:
                self._bump_version(server.server_id)
            return len(affected)

    def resolve_targets(self, selector: TargetSelector) -> list[ServerDescriptor]:
        return sorted((s for s in self.servers() if selector.matches(s)),
                      key=lambda s: s.server_id)

    def compile_config(self, agent_id: str) -> VersionedTaskSet:
        """The agent's current task set: enabled templates whose selector matches."""
        with self._lock:
            server = self.get_server(agent_id)
            if server is None:
                raise ControlPlaneError(f"unknown agent {agent_id!r}")
            tasks = [t.task for t in self.templates()
                     if t.enabled and t.selector.matches(server)]
            return VersionedTaskSet(self._version(agent_id), tasks)

    # -- execution logs --------------------------------------------------------

    def record_execution(self, log: ExecutionLog) -> None:
        with self._lock:
            index = len(self._executions)
            self._executions.append(log)
            self.meta.put("executions", str(index), log.to_json())

    def query_executions(self, task_id: Optional[str] = None,
                         server_id: Optional[str] = None,
                         from_ms: Optional[int] = None,
                         to_ms: Optional[int] = None) -> list[ExecutionLog]:
        out = []
        for log in self._executions:
            if task_id is not None and log.task_id != task_id:
                continue
            if server_id is not None and log.server_id != server_id:
                continue
            if from_ms is not None and log.started_at < from_ms:
                continue
            if to_ms is not None and log.started_at >= to_ms:
                continue
            out.append(log)
        return out
