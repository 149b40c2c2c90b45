"""Wire-format tests over real loopback HTTP: core routes and the gateway."""

import base64
import gzip
import json

import pytest
import requests

from miniops.records import Batch, Record
from miniops.runtime import ServiceStack

TOKEN = "test-token"
AUTH = {"Authorization": f"Bearer {TOKEN}"}


@pytest.fixture(scope="module")
def stack(tmp_path_factory):
    stack = ServiceStack(tmp_path_factory.mktemp("stack"), token=TOKEN,
                         pump_interval_s=0.02)
    stack.start()
    yield stack
    stack.stop()


def batch_payload(batch_id="hb1", value=1.0):
    record = Record.metric("metrics.http", "s9", "http.test", 1234, value)
    return Batch(batch_id, "agent-http", 1, [record]).encode()


# -- core: ingestion ---------------------------------------------------------


def test_batch_roundtrip_and_ack(stack):
    resp = requests.post(f"{stack.core_url}/v1/batch", data=batch_payload(),
                         headers={"Content-Type": "application/json",
                                  "Content-Encoding": "gzip"})
    assert resp.status_code == 200
    assert resp.json()["acked"] == "hb1"


def test_batch_schema_rejection_names_record_index(stack):
    records = [{"topic": "t", "kind": "metric", "server": "s", "name": "m",
                "ts": 1, "value": 1.0, "tags": {}},
               {"topic": "t", "kind": "metric", "server": "s", "name": "m",
                "value": 2.0, "tags": {}}]
    doc = {"batch_id": "bad1", "agent_id": "a", "sent_at": 1, "records": records}
    resp = requests.post(f"{stack.core_url}/v1/batch",
                         data=gzip.compress(json.dumps(doc).encode()))
    assert resp.status_code == 400
    assert resp.json()["record_index"] == 1


def test_batch_flows_to_store(stack):
    requests.post(f"{stack.core_url}/v1/batch", data=batch_payload("hb2", 42.0))
    stack.drain()
    resp = requests.post(f"{stack.core_url}/v1/query", json={
        "sql": 'SELECT last(value) FROM "http.test" WHERE ts >= 0 AND ts < 99999'})
    assert resp.status_code == 200
    body = resp.json()
    assert body["columns"] == ["time", "value"]
    assert body["rows"][0][1] == 42.0


# -- core: queue -------------------------------------------------------------


def test_queue_publish_poll_commit(stack):
    base = f"{stack.core_url}/v1/queue/wire.topic"
    for i in range(3):
        resp = requests.post(base, data=f"payload-{i}".encode())
        assert resp.json()["offset"] == i
    requests.post(f"{base}/groups", json={"group": "g1", "start": "earliest"})
    msgs = requests.get(base, params={"group": "g1", "max": 10}).json()["messages"]
    assert [m["offset"] for m in msgs] == [0, 1, 2]
    assert base64.b64decode(msgs[0]["payload"]) == b"payload-0"
    resp = requests.post(f"{base}/commit", json={"group": "g1", "offset": 2})
    assert resp.json()["committed"] == 2
    msgs = requests.get(base, params={"group": "g1", "max": 10}).json()["messages"]
    assert [m["offset"] for m in msgs] == [2]


def test_queue_unknown_group_404(stack):
    resp = requests.get(f"{stack.core_url}/v1/queue/wire.topic",
                        params={"group": "ghost", "max": 1})
    assert resp.status_code == 404


# -- core: store, parse, logs ---------------------------------------------------


def test_parse_endpoint_reports_column(stack):
    resp = requests.post(f"{stack.core_url}/v1/parse", json={"sql": "SELECT avg(value)"})
    assert resp.status_code == 400
    assert resp.json()["column"] == 18
    ok = requests.post(f"{stack.core_url}/v1/parse", json={
        "sql": 'SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 5'})
    assert ok.json()["ok"] is True
    assert "canonical" in ok.json()


def test_logs_flow_and_query(stack):
    record = Record.log("logs.http", "s9", "task1", 5555, "ERROR", "wire log test")
    requests.post(f"{stack.core_url}/v1/batch",
                  data=Batch("hb-log", "agent-http", 2, [record]).encode())
    stack.drain()
    resp = requests.post(f"{stack.core_url}/v1/logs/query",
                         json={"level": "ERROR", "contains": "wire"})
    events = resp.json()["events"]
    assert any(e["message"] == "wire log test" for e in events)


# -- control plane over HTTP ------------------------------------------------------


def test_controlplane_roundtrip(stack):
    requests.post(f"{stack.core_url}/v1/agents", json={
        "server_id": "cp-s1", "client_name": "acme", "role": "dbms", "tags": {}})
    template = {
        "template_id": "wire-ping",
        "task": {"task_id": "wire-ping", "kind": "http_probe",
                 "spec": {"url": "http://127.0.0.1:1/", "metric": "ping"},
                 "period_seconds": 600, "output_topic": "metrics.ping"},
        "selector": [["role", "eq", "dbms"]],
    }
    resp = requests.post(f"{stack.core_url}/v1/templates", json=template)
    assert resp.json()["affected"] == 1
    tasks = requests.get(f"{stack.core_url}/v1/agents/cp-s1/tasks").json()
    assert [t["task_id"] for t in tasks["tasks"]] == ["wire-ping"]
    assert tasks["version"] >= 2
    resp = requests.delete(f"{stack.core_url}/v1/templates/wire-ping")
    assert resp.json()["affected"] == 1
    assert requests.get(f"{stack.core_url}/v1/agents/ghost/tasks").status_code == 404


# -- gateway ------------------------------------------------------------------------


def test_gateway_passthrough_get(stack):
    resp = requests.get(f"{stack.gateway_url}/api/tickets")
    assert resp.status_code == 200
    assert "tickets" in resp.json()
    assert "X-Request-Id" in resp.headers


def test_gateway_mutation_requires_token(stack):
    body = {"title": "t", "attributes": {}, "severity": "major"}
    resp = requests.post(f"{stack.gateway_url}/api/tickets", json=body)
    assert resp.status_code == 401
    resp = requests.post(f"{stack.gateway_url}/api/tickets", json=body,
                         headers={"Authorization": "Bearer wrong"})
    assert resp.status_code == 401


def test_gateway_routes_mutations_with_token(stack):
    body = {"title": "gw ticket", "description": "", "severity": "minor",
            "attributes": {"server": "s1", "application": "erp", "client": "c",
                           "occurred_at": "1"}}
    resp = requests.post(f"{stack.gateway_url}/api/tickets", json=body, headers=AUTH)
    assert resp.status_code == 200
    ticket_id = resp.json()["ticket_id"]
    assert requests.get(f"{stack.gateway_url}/api/tickets/{ticket_id}").ok


def test_gateway_preserves_upstream_status_codes(stack):
    resp = requests.post(f"{stack.gateway_url}/api/parse", json={"sql": "bogus"},
                         headers=AUTH)
    assert resp.status_code == 400
    assert "column" in resp.json()


def test_gateway_unknown_route_404(stack):
    assert requests.get(f"{stack.gateway_url}/api/nonsense").status_code == 404


def test_gateway_health_reports_subsystems(stack):
    resp = requests.get(f"{stack.gateway_url}/api/health")
    body = resp.json()
    assert body["ok"] is True
    assert set(body["subsystems"].values()) == {"up"}
    assert "store_partitions" in body


def test_gateway_upstream_down_502_naming_it(tmp_path):
    from miniops.gateway import ApiConfig, build_gateway_app
    from miniops.runtime import HttpServer

    config = ApiConfig.single_upstream("http://127.0.0.1:1", token="")
    server = HttpServer(build_gateway_app(config))
    url = server.start()
    try:
        resp = requests.get(f"{url}/api/tickets")
        assert resp.status_code == 502
        assert resp.json()["upstream"] == "incidents"
        health = requests.get(f"{url}/api/health").json()
        assert health["ok"] is False
        assert set(health["subsystems"].values()) == {"down"}
    finally:
        server.stop()


def test_gateway_queue_lag_visible_after_pause(tmp_path):
    """Publish without consuming: gateway health reports positive lag."""
    stack = ServiceStack(tmp_path / "lagstack", token="", pump_interval_s=0)
    stack.start()
    try:
        base = f"{stack.core_url}/v1/queue/lag.topic"
        for i in range(5):
            requests.post(base, data=b"x")
        requests.post(f"{base}/groups", json={"group": "tsstore", "start": "earliest"})
        health = requests.get(f"{stack.gateway_url}/api/health").json()
        assert health["queue_lag"]["lag.topic"]["tsstore"] == 5
    finally:
        stack.stop()
