"""Core HTTP server: every subsystem's /v1 surface in one ASGI app.

One process owns the data directory (queue segments, store partitions,
metadata); everything else talks to it over these routes. The gateway
re-exposes them under /api with authentication, and agents hit
POST /v1/batch directly.
"""

from __future__ import annotations

import base64
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, Query as QueryParam, Request, Response
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from .alerting.engine import AlertEngine, Dispatcher, StoreUnavailable
from .alerting.rules import AlertRule
from .controlplane import (
    ControlPlane,
    ControlPlaneError,
    ExecutionLog,
    ServerDescriptor,
    TargetSelector,
    TaskTemplate,
)
from .incidents import IncidentError, IncidentService
from .incidents.service import TriageRule
from .ingester import Ingester, IngestError
from .mqueue import Broker, BrokerError, UnknownGroupError
from .records import validate_record
from .tsstore.sql import ParseError, parse_query, print_query
from .tsstore.store import LogStore, MetadataStore, MetricStore


@dataclass
class FaultFlags:
    """Fault-injection switches used by the simulator and tests."""

    ingester_down: bool = False


class DirectStoreClient:
    """StoreClient over the embedded MetricStore (for the alert engine)."""

    def __init__(self, store: MetricStore):
        self.store = store

    def query(self, q):
        try:
            return self.store.query(q)
        except OSError as exc:
            raise StoreUnavailable(str(exc)) from exc


@dataclass
class CoreServices:
    """Everything the core server owns, wired over one data directory."""

    data_dir: Path
    broker: Broker
    metrics: MetricStore
    logs: LogStore
    meta: MetadataStore
    controlplane: ControlPlane
    ingester: Ingester
    incidents: IncidentService
    engine: AlertEngine
    faults: FaultFlags = field(default_factory=FaultFlags)
    consumer_group: str = "tsstore"
    # the store writer consumes only its own topics; anything else stays
    # queued for other destinations
    consumer_prefixes: tuple[str, ...] = ("metrics.", "logs.")

    @classmethod
    def create(cls, data_dir: str | Path, partition_s: int = 3600,
               metric_retention_s: int = 2 * 365 * 24 * 3600,
               log_retention_s: int = 30 * 24 * 3600) -> "CoreServices":
        root = Path(data_dir)
        broker = Broker(root / "queue")
        metrics = MetricStore(root / "store" / "metrics", partition_s=partition_s,
                              retention_s=metric_retention_s)
        logs = LogStore(root / "store" / "logs", retention_s=log_retention_s)
        meta = MetadataStore(root / "meta.json")
        incidents = IncidentService(meta)
        engine = AlertEngine(DirectStoreClient(metrics), Dispatcher(incidents))
        core = cls(
            data_dir=root,
            broker=broker,
            metrics=metrics,
            logs=logs,
            meta=meta,
            controlplane=ControlPlane(meta),
            ingester=Ingester(broker),
            incidents=incidents,
            engine=engine,
        )
        core.load_rules()
        return core

    # -- persisted alert rules ------------------------------------------------

    def load_rules(self) -> None:
        for doc in self.meta.items("rules").values():
            self.engine.put_rule(AlertRule.from_json(doc))

    def put_rule(self, rule: AlertRule) -> None:
        self.meta.put("rules", rule.rule_id, rule.to_json())
        self.engine.put_rule(rule)

    def delete_rule(self, rule_id: str) -> bool:
        self.meta.delete("rules", rule_id)
        return self.engine.delete_rule(rule_id)

    # -- queue -> store pump ------------------------------------------------------

    def pump_once(self, max_messages: int = 2000) -> int:
        """Drain queue topics into the stores; returns records written."""
        import json as _json

        written = 0
        for topic in self.broker.list_topics():
            if not topic.startswith(self.consumer_prefixes):
                continue
            if self.consumer_group not in self.broker.groups(topic):
                self.broker.register_group(self.consumer_group, topic, start="earliest")
            while True:
                messages = self.broker.poll(self.consumer_group, topic, max_messages)
                if not messages:
                    break
                points, events = [], []
                for message in messages:
                    try:
                        record = validate_record(_json.loads(message.payload), 0)
                    except (ValueError, UnicodeDecodeError):
                        continue  # poison message: skip, keep the topic moving
                    if record.kind == "metric":
                        points.append(record.to_point())
                    else:
                        events.append(record.to_event())
                if points:
                    self.metrics.write_points(points)
                if events:
                    self.logs.store(events)
                self.broker.commit(self.consumer_group, topic, messages[-1].offset + 1)
                written += len(messages)
                if len(messages) < max_messages:
                    break
        return written

    def maintain(self, now_ms: Optional[int] = None) -> None:
        """Seal cold partitions, enforce retention, trim consumed segments."""
        now = int(time.time() * 1000) if now_ms is None else now_ms
        self.metrics.maintain(now)
        self.metrics.enforce_retention(now)
        self.logs.enforce_retention(now)
        for topic in self.broker.list_topics():
            self.broker.trim(topic)

    def health(self) -> dict:
        return {
            "store": {
                "partitions": len(self.metrics.partitions()),
                "log_events": self.logs.count(),
            },
            "queue": self.broker.stats(),
            "rules": len(self.engine.list_rules()),
            "open_tickets": len([t for t in self.incidents.tickets()
                                 if t.status not in ("resolved", "closed")]),
        }

    def close(self) -> None:
        self.broker.close()


def _error(status: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status)


def build_core_app(core: CoreServices) -> FastAPI:
    app = FastAPI(title="miniops core", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def request_id(request: Request, call_next):
        response = await call_next(request)
        response.headers.setdefault("X-Request-Id", uuid.uuid4().hex)
        return response

    # -- control plane -------------------------------------------------------

    @app.post("/v1/agents")
    def register_agent(payload: dict = Body(...)):
        try:
            desc = ServerDescriptor.from_json(payload)
            return core.controlplane.register_agent(desc)
        except (ControlPlaneError, KeyError) as exc:
            return _error(400, str(exc))

    @app.get("/v1/agents")
    def list_agents():
        return {"servers": [s.to_json() for s in core.controlplane.servers()]}

    @app.get("/v1/agents/{agent_id}/tasks")
    def agent_tasks(agent_id: str):
        try:
            return core.controlplane.compile_config(agent_id).to_json()
        except ControlPlaneError as exc:
            return _error(404, str(exc))

    @app.post("/v1/templates")
    def post_template(payload: dict = Body(...)):
        try:
            template = TaskTemplate.from_json(payload)
            affected = core.controlplane.plan_task(template)
            return {"template_id": template.template_id, "affected": affected}
        except (ControlPlaneError, ValueError, KeyError) as exc:
            status = 409 if "already planned" in str(exc) else 400
            return _error(status, str(exc))

    @app.delete("/v1/templates/{template_id}")
    def delete_template(template_id: str):
        try:
            return {"template_id": template_id,
                    "affected": core.controlplane.unplan_task(template_id)}
        except ControlPlaneError as exc:
            return _error(404, str(exc))

    @app.get("/v1/templates")
    def list_templates():
        return {"templates": [t.to_json() for t in core.controlplane.templates()]}

    @app.post("/v1/targets/resolve")
    def resolve_targets(payload: dict = Body(...)):
        try:
            selector = TargetSelector.from_json(payload.get("selector", []))
            return {"servers": [s.to_json() for s in core.controlplane.resolve_targets(selector)]}
        except ControlPlaneError as exc:
            return _error(400, str(exc))

    @app.post("/v1/executions")
    def post_execution(payload: dict = Body(...)):
        try:
            core.controlplane.record_execution(ExecutionLog.from_json(payload))
            return {"ok": True}
        except KeyError as exc:
            return _error(400, f"missing field {exc}")

    @app.get("/v1/executions")
    def get_executions(task_id: Optional[str] = None, server_id: Optional[str] = None,
                       from_ms: Optional[int] = QueryParam(None, alias="from"),
                       to_ms: Optional[int] = QueryParam(None, alias="to")):
        logs = core.controlplane.query_executions(task_id, server_id, from_ms, to_ms)
        return {"executions": [log.to_json() for log in logs]}

    # -- ingestion ---------------------------------------------------------------

    @app.post("/v1/batch")
    async def post_batch(request: Request):
        if core.faults.ingester_down:
            return _error(503, "ingester down (injected fault)")
        raw = await request.body()
        try:
            result = await run_in_threadpool(core.ingester.receive_batch, raw)
        except IngestError as exc:
            extra = {}
            if exc.record_index is not None:
                extra["record_index"] = exc.record_index
            return _error(exc.status, str(exc), **extra)
        return {"acked": result.batch_id, "published": result.published,
                "duplicate": result.duplicate}

    # -- queue ----------------------------------------------------------------------

    @app.post("/v1/queue/{topic}")
    async def queue_publish(topic: str, request: Request):
        payload = await request.body()
        try:
            offset = await run_in_threadpool(core.broker.publish, topic, payload)
        except BrokerError as exc:
            return _error(400, str(exc))
        except OSError as exc:
            return _error(503, str(exc))
        return {"offset": offset}

    @app.get("/v1/queue/health")
    def queue_health():
        return core.broker.stats()

    @app.get("/v1/queue/{topic}")
    def queue_poll(topic: str, group: str, max: int = 100):
        try:
            messages = core.broker.poll(group, topic, max)
        except UnknownGroupError as exc:
            return _error(404, str(exc))
        except BrokerError as exc:
            return _error(400, str(exc))
        return {"messages": [{
            "offset": m.offset,
            "payload": base64.b64encode(m.payload).decode("ascii"),
            "crc": m.crc,
            "enqueued_at": m.enqueued_at,
        } for m in messages]}

    @app.post("/v1/queue/{topic}/commit")
    def queue_commit(topic: str, payload: dict = Body(...)):
        try:
            committed = core.broker.commit(payload["group"], topic, int(payload["offset"]))
        except UnknownGroupError as exc:
            return _error(404, str(exc))
        except (BrokerError, KeyError) as exc:
            return _error(400, str(exc))
        return {"committed": committed}

    @app.post("/v1/queue/{topic}/groups")
    def queue_register(topic: str, payload: dict = Body(...)):
        try:
            core.broker.register_group(payload["group"], topic,
                                       payload.get("start", "earliest"))
        except (BrokerError, KeyError) as exc:
            return _error(409 if "already registered" in str(exc) else 400, str(exc))
        return {"group": payload["group"],
                "committed": core.broker.groups(topic)[payload["group"]]}

    # -- store ---------------------------------------------------------------------------

    @app.post("/v1/query")
    def store_query(payload: dict = Body(...)):
        sql = payload.get("sql", "")
        try:
            q = parse_query(sql)
            rows = core.metrics.query(q)
        except ParseError as exc:
            return _error(400, exc.reason, column=exc.column)
        except ValueError as exc:
            return _error(400, str(exc))
        columns = list(q.group_by) + ["time", "value"]
        return {"columns": columns,
                "rows": [[*group, bucket, value] for group, bucket, value in rows]}

    @app.post("/v1/parse")
    def store_parse(payload: dict = Body(...)):
        try:
            q = parse_query(payload.get("sql", ""))
        except ParseError as exc:
            return _error(400, exc.reason, column=exc.column)
        return {"ok": True, "canonical": print_query(q), "query": {
            "metric": q.metric, "agg": q.agg, "from": q.from_ms, "to": q.to_ms,
            "filters": [list(f) for f in q.filters], "bucket_s": q.bucket_s,
            "group_by": list(q.group_by)}}

    @app.post("/v1/logs/query")
    def logs_query(payload: dict = Body(default={})):
        events = core.logs.query(
            level=payload.get("level"), server=payload.get("server"),
            contains=payload.get("contains"), from_ms=payload.get("from"),
            to_ms=payload.get("to"))
        return {"events": [{
            "ts": e.ts, "server": e.server, "level": e.level,
            "message": e.message, "fields": dict(e.fields),
        } for e in events]}

    # -- console panels ---------------------------------------------------------------

    @app.get("/v1/panels")
    def list_panels():
        return {"panels": sorted(core.meta.items("panels").values(),
                                 key=lambda p: p["panel_id"])}

    @app.post("/v1/panels")
    def put_panel(payload: dict = Body(...)):
        sql = payload.get("query", "")
        try:
            parse_query(sql)
        except ParseError as exc:
            return _error(400, exc.reason, column=exc.column)
        panel_id = payload.get("panel_id") or uuid.uuid4().hex[:8]
        doc = {"panel_id": panel_id, "query": sql,
               "refresh_s": int(payload.get("refresh_s", 30)),
               "kind": payload.get("kind", "timeseries")}
        if doc["kind"] not in ("timeseries", "single-stat", "table"):
            return _error(400, f"unknown panel kind {doc['kind']!r}")
        core.meta.put("panels", panel_id, doc)
        return doc

    @app.delete("/v1/panels/{panel_id}")
    def delete_panel(panel_id: str):
        return {"deleted": core.meta.delete("panels", panel_id)}

    # -- alerting --------------------------------------------------------------------------

    @app.post("/v1/rules")
    def post_rule(payload: dict = Body(...)):
        try:
            rule = AlertRule.from_json(payload)
        except (ParseError, ValueError, KeyError) as exc:
            return _error(400, str(exc))
        core.put_rule(rule)
        return rule.to_json()

    @app.get("/v1/rules")
    def get_rules():
        return {"rules": [r.to_json() for r in core.engine.list_rules()]}

    @app.delete("/v1/rules/{rule_id}")
    def delete_rule(rule_id: str):
        if not core.delete_rule(rule_id):
            return _error(404, f"unknown rule {rule_id!r}")
        return {"deleted": True}

    @app.get("/v1/alerts")
    def get_alerts(state: Optional[str] = None):
        return {"alerts": [i.to_json() for i in core.engine.instances(state)]}

    @app.post("/v1/rules/test")
    def test_rule(payload: dict = Body(...)):
        """Dry-run one evaluation: no state change, no actions dispatched."""
        try:
            rule = AlertRule.from_json(payload.get("rule", payload))
        except (ParseError, ValueError, KeyError) as exc:
            return _error(400, str(exc))
        now = payload.get("now", int(time.time() * 1000))
        scratch = AlertEngine(DirectStoreClient(core.metrics), dispatcher=None,
                              forecast_window_days=core.engine.forecast_window_days)
        transitions = scratch.evaluate_rule(rule, now)
        return {"transitions": [{
            "rule_id": t.rule_id, "group": list(t.group), "old_state": t.old_state,
            "new_state": t.new_state, "at": t.at, "value": t.value,
        } for t in transitions]}

    @app.post("/v1/alerts/evaluate")
    def evaluate_now(payload: dict = Body(default={})):
        """Run one engine tick (used by the simulator and the CLI)."""
        now = payload.get("now", int(time.time() * 1000))
        transitions = core.engine.evaluate_due(now)
        pending = core.engine.dispatcher.retry_pending() if core.engine.dispatcher else 0
        return {"transitions": len(transitions), "pending_actions": pending}

    # -- incidents ----------------------------------------------------------------------------

    @app.post("/v1/tickets")
    def post_ticket(payload: dict = Body(...)):
        try:
            ticket = core.incidents.create_ticket(
                title=payload["title"],
                description=payload.get("description", ""),
                attributes=payload.get("attributes", {}),
                severity=payload.get("severity", "major"),
                source=payload.get("source"),
                team_hint=payload.get("team_hint", ""),
            )
        except IncidentError as exc:
            return _error(exc.status, str(exc))
        except (ValueError, KeyError) as exc:
            return _error(400, str(exc))
        return ticket.to_json()

    @app.get("/v1/tickets")
    def list_tickets(team: Optional[str] = None, status: Optional[str] = None):
        return {"tickets": [t.to_json() for t in core.incidents.tickets(team, status)]}

    @app.get("/v1/tickets/{ticket_id}")
    def get_ticket(ticket_id: str):
        try:
            return core.incidents.get(ticket_id).to_json()
        except IncidentError as exc:
            return _error(exc.status, str(exc))

    @app.post("/v1/tickets/{ticket_id}/transition")
    def transition_ticket(ticket_id: str, payload: dict = Body(...)):
        try:
            ticket = core.incidents.transition(
                ticket_id, payload["status"], payload.get("actor", "api"),
                expected_revision=payload.get("expected_revision"))
        except IncidentError as exc:
            return _error(exc.status, str(exc))
        except KeyError as exc:
            return _error(400, f"missing field {exc}")
        return ticket.to_json()

    @app.post("/v1/tickets/{ticket_id}/comments")
    def comment_ticket(ticket_id: str, payload: dict = Body(...)):
        try:
            ticket = core.incidents.add_comment(
                ticket_id, payload.get("author", "api"), payload["text"])
        except IncidentError as exc:
            return _error(exc.status, str(exc))
        except KeyError as exc:
            return _error(400, f"missing field {exc}")
        return ticket.to_json()

    @app.get("/v1/teams/{team}/queue")
    def team_queue(team: str):
        return {"tickets": [t.to_json() for t in core.incidents.rank_queue(team)]}

    @app.post("/v1/triage-rules")
    def post_triage_rules(payload: dict = Body(...)):
        try:
            rules = [TriageRule.from_json(doc) for doc in payload["rules"]]
            core.incidents.set_triage_rules(rules)
        except IncidentError as exc:
            return _error(exc.status, str(exc))
        except (ValueError, KeyError) as exc:
            return _error(400, str(exc))
        return {"rules": [r.to_json() for r in core.incidents.triage_rules()]}

    @app.get("/v1/triage-rules")
    def get_triage_rules():
        return {"rules": [r.to_json() for r in core.incidents.triage_rules()]}

    # -- ops ---------------------------------------------------------------------------------------

    @app.get("/v1/health")
    def health():
        return core.health()

    @app.post("/v1/admin/fault")
    def set_fault(payload: dict = Body(...)):
        if "ingester_down" in payload:
            core.faults.ingester_down = bool(payload["ingester_down"])
        return {"ingester_down": core.faults.ingester_down}

    @app.post("/v1/admin/pump")
    def pump(payload: dict = Body(default={})):
        return {"written": core.pump_once()}

    @app.post("/v1/admin/maintain")
    def maintain(payload: dict = Body(default={})):
        core.maintain(payload.get("now"))
        return {"ok": True}

    return app
