"""Unified REST facade: /api/* routed to the owning subsystem.

Routing adds no semantics: status codes and bodies pass through untouched,
with a request id header added. Mutating methods require the static bearer
token; reads are open inside the trust boundary. A stopped upstream maps
to 502 naming the subsystem, so the console can say what is down.
"""

from __future__ import annotations

import os
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests as requests_lib
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool
from starlette.staticfiles import StaticFiles

# first path segment under /api -> owning subsystem
ROUTE_TABLE = {
    "agents": "controlplane",
    "templates": "controlplane",
    "executions": "controlplane",
    "targets": "controlplane",
    "batch": "ingester",
    "queue": "queue",
    "query": "store",
    "parse": "store",
    "logs": "store",
    "panels": "store",
    "rules": "alerting",
    "alerts": "alerting",
    "tickets": "incidents",
    "teams": "incidents",
    "triage-rules": "incidents",
    "admin": "admin",
}

MUTATING_METHODS = ("POST", "PUT", "DELETE", "PATCH")

_HOP_HEADERS = {"content-length", "content-encoding", "transfer-encoding", "connection"}


@dataclass
class ApiConfig:
    upstreams: dict[str, str]  # subsystem name -> base URL
    token: str = ""
    cors_origins: list[str] = field(default_factory=list)
    static_dir: Optional[str] = None
    timeout_s: float = 30.0

    @classmethod
    def single_upstream(cls, base_url: str, token: str = "", **kwargs) -> "ApiConfig":
        upstreams = {name: base_url for name in set(ROUTE_TABLE.values())}
        return cls(upstreams=upstreams, token=token, **kwargs)


def build_gateway_app(config: ApiConfig) -> FastAPI:
    app = FastAPI(title="miniops gateway", docs_url=None, redoc_url=None)
    session = requests_lib.Session()

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def _unauthorized() -> JSONResponse:
        return JSONResponse({"error": "missing or invalid token"}, status_code=401)

    def _probe(name: str, path: str) -> tuple[bool, Optional[dict]]:
        base = config.upstreams.get(name)
        if base is None:
            return False, None
        try:
            resp = session.get(f"{base}{path}", timeout=5)
            return resp.status_code < 500, (resp.json() if resp.ok else None)
        except (requests_lib.RequestException, ValueError):
            return False, None

    @app.get("/api/health")
    def health():
        """Per-subsystem status plus queue lag and store partition count."""
        report: dict = {"subsystems": {}}
        checks = {
            "controlplane": "/v1/templates",
            "ingester": "/v1/health",
            "queue": "/v1/queue/health",
            "store": "/v1/health",
            "alerting": "/v1/rules",
            "incidents": "/v1/triage-rules",
        }
        queue_stats = None
        store_health = None
        for name, path in checks.items():
            up, body = _probe(name, path)
            report["subsystems"][name] = "up" if up else "down"
            if name == "queue" and up:
                queue_stats = body
            if name == "store" and up:
                store_health = body
        if queue_stats is not None:
            report["queue_lag"] = {topic: stats.get("lag", {})
                                   for topic, stats in queue_stats.items()}
        if store_health is not None:
            report["store_partitions"] = store_health.get("store", {}).get("partitions")
        report["ok"] = all(v == "up" for v in report["subsystems"].values())
        return report

    @app.api_route("/api/{path:path}",
                   methods=["GET", "POST", "PUT", "DELETE", "PATCH"])
    async def route(path: str, request: Request):
        request_id = uuid.uuid4().hex
        if request.method in MUTATING_METHODS and config.token:
            auth = request.headers.get("authorization", "")
            if auth != f"Bearer {config.token}":
                response = _unauthorized()
                response.headers["X-Request-Id"] = request_id
                return response

        segment = path.split("/", 1)[0]
        upstream_name = ROUTE_TABLE.get(segment)
        if upstream_name is None:
            return JSONResponse({"error": f"unknown route /api/{segment}"},
                                status_code=404,
                                headers={"X-Request-Id": request_id})
        base = config.upstreams[upstream_name]
        body = await request.body()
        forward_headers = {}
        for key in ("content-type", "content-encoding"):
            if key in request.headers:
                forward_headers[key] = request.headers[key]

        def do_request():
            return session.request(
                request.method,
                f"{base}/v1/{path}",
                params=dict(request.query_params),
                data=body,
                headers=forward_headers,
                timeout=config.timeout_s,
            )

        try:
            upstream_response = await run_in_threadpool(do_request)
        except requests_lib.RequestException as exc:
            return JSONResponse(
                {"error": f"upstream {upstream_name} unavailable: {exc.__class__.__name__}",
                 "upstream": upstream_name},
                status_code=502,
                headers={"X-Request-Id": request_id},
            )
        headers = {k: v for k, v in upstream_response.headers.items()
                   if k.lower() not in _HOP_HEADERS}
        headers["X-Request-Id"] = request_id
        return Response(content=upstream_response.content,
                        status_code=upstream_response.status_code,
                        headers=headers)

    static_dir = config.static_dir or os.environ.get("MINIOPS_CONSOLE_DIR")
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
