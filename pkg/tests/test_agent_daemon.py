"""Agent daemon against a live stack: config poll, execution, delivery, logs."""

import time

import pytest
import requests

from miniops.agent.daemon import AgentConfig, AgentDaemon
from miniops.runtime import ServiceStack


@pytest.fixture
def stack(tmp_path):
    stack = ServiceStack(tmp_path / "pipeline", pump_interval_s=0.02)
    stack.start()
    yield stack
    stack.stop()


def test_daemon_end_to_end(stack, tmp_path):
    requests.post(f"{stack.core_url}/v1/agents", json={
        "server_id": "daemon-1", "client_name": "acme", "role": "web", "tags": {}})
    template = {
        "template_id": "proc-count",
        "task": {"task_id": "proc-count", "kind": "builtin_metric",
                 "spec": {"generator": "proc_count"}, "period_seconds": 1,
                 "output_topic": "metrics.host"},
        "selector": [],
    }
    assert requests.post(f"{stack.core_url}/v1/templates", json=template).ok

    daemon = AgentDaemon(AgentConfig(
        agent_id="daemon-1",
        controlplane_url=stack.core_url,
        ingester_url=stack.core_url,
        spool_dir=str(tmp_path / "spool"),
        spool_capacity=50,
        config_poll_s=0.1,
    ))
    try:
        deadline = time.monotonic() + 15
        points = 0
        while time.monotonic() < deadline and points < 2:
            daemon.run_once()
            time.sleep(0.2)
            rows = requests.post(f"{stack.core_url}/v1/query", json={
                "sql": ('SELECT count(value) FROM "proc_count" WHERE '
                        "server='daemon-1' AND ts >= 0 AND ts < 99999999999999")
            }).json()["rows"]
            points = rows[0][-1] if rows else 0
        assert points >= 2, "daemon must deliver scheduled builtin metrics"
    finally:
        daemon.stop()

    executions = requests.get(f"{stack.core_url}/v1/executions",
                              params={"task_id": "proc-count"}).json()["executions"]
    assert len(executions) >= 2
    assert all(e["outcome"] == "ok" for e in executions)
    assert len(daemon.spool) == 0  # everything delivered and acked


def test_daemon_applies_config_updates(stack, tmp_path):
    requests.post(f"{stack.core_url}/v1/agents", json={
        "server_id": "daemon-2", "client_name": "acme", "role": "web", "tags": {}})
    daemon = AgentDaemon(AgentConfig(
        agent_id="daemon-2",
        controlplane_url=stack.core_url,
        ingester_url=stack.core_url,
        spool_dir=str(tmp_path / "spool2"),
        spool_capacity=10,
    ))
    try:
        assert daemon.poll_config()
        assert daemon.scheduler.tasks == {}
        template = {
            "template_id": "d2-task",
            "task": {"task_id": "d2-task", "kind": "builtin_metric",
                     "spec": {"generator": "cpu_load"}, "period_seconds": 5,
                     "output_topic": "metrics.host"},
            "selector": [["server_id", "eq", "daemon-2"]],
        }
        requests.post(f"{stack.core_url}/v1/templates", json=template)
        assert daemon.poll_config()
        assert set(daemon.scheduler.tasks) == {"d2-task"}
        # stale re-poll is a no-op
        assert not daemon.poll_config()
        requests.delete(f"{stack.core_url}/v1/templates/d2-task")
        assert daemon.poll_config()
        assert daemon.scheduler.tasks == {}
    finally:
        daemon.stop()
