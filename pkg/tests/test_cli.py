"""CLI: subcommands, exit codes, JSON output, selector parsing."""

import json

import pytest

from miniops.cli import cli_main, parse_selector
from miniops.runtime import ServiceStack

TOKEN = "cli-token"


@pytest.fixture(scope="module")
def stack(tmp_path_factory):
    stack = ServiceStack(tmp_path_factory.mktemp("clistack"), token=TOKEN,
                         pump_interval_s=0.02)
    stack.start()
    yield stack
    stack.stop()


def run_cli(stack, *argv):
    return cli_main(["--gateway-url", stack.gateway_url, "--token", TOKEN, *argv])


def test_unknown_subcommand_exit_1(stack, capsys):
    assert run_cli(stack, "frobnicate") == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_no_subcommand_exit_1(stack, capsys):
    assert run_cli(stack) == 1


def test_health_human_and_json(stack, capsys):
    assert run_cli(stack, "health") == 0
    out = capsys.readouterr().out
    assert "store" in out and "up" in out

    assert cli_main(["--gateway-url", stack.gateway_url, "--json", "health"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is True


def test_transport_error_exit_2(capsys):
    code = cli_main(["--gateway-url", "http://127.0.0.1:1", "health"])
    assert code == 2
    assert "transport error" in capsys.readouterr().err


def test_query_prints_table(stack, capsys):
    from miniops.records import MetricPoint, SeriesKey
    stack.core.metrics.write_points([
        MetricPoint(SeriesKey.of("cli.metric", server="s1"), 1000, 7.0)])
    sql = 'SELECT last(value) FROM "cli.metric" WHERE ts >= 0 AND ts < 9999'
    assert run_cli(stack, "query", sql) == 0
    out = capsys.readouterr().out
    assert "time" in out and "value" in out and "7.0" in out


def test_bad_sql_exit_1_with_column(stack, capsys):
    assert run_cli(stack, "query", "SELECT avg(value)") == 1
    err = capsys.readouterr().err
    assert "column 18" in err


def test_fleet_plan_unplan_roundtrip(stack, tmp_path, capsys):
    run_cli(stack, "--json", "health")  # warm up
    capsys.readouterr()
    template = {
        "template_id": "cli-ping",
        "task": {"task_id": "cli-ping", "kind": "http_probe",
                 "spec": {"url": "http://127.0.0.1:1/", "metric": "ping"},
                 "period_seconds": 600, "output_topic": "metrics.ping"},
        "selector": [],
    }
    path = tmp_path / "template.json"
    path.write_text(json.dumps(template))
    assert run_cli(stack, "fleet", "plan", str(path)) == 0
    assert "cli-ping" in capsys.readouterr().out
    assert run_cli(stack, "fleet", "list") == 0
    assert "cli-ping" in capsys.readouterr().out
    assert run_cli(stack, "fleet", "unplan", "cli-ping") == 0
    capsys.readouterr()
    assert run_cli(stack, "fleet", "unplan", "cli-ping") == 1  # already disabled


def test_fleet_targets(stack, capsys):
    import requests
    requests.post(f"{stack.core_url}/v1/agents", json={
        "server_id": "cli-db1", "client_name": "acme", "role": "dbms", "tags": {}})
    assert run_cli(stack, "fleet", "targets", "role=dbms") == 0
    assert "cli-db1" in capsys.readouterr().out


def test_connection_flags_accepted_after_subcommand(stack, capsys):
    assert cli_main(["health", "--gateway-url", stack.gateway_url, "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["ok"] is True
    # flags before the subcommand still take effect when not repeated after
    assert cli_main(["--gateway-url", stack.gateway_url, "--token", TOKEN,
                     "tickets", "list"]) == 0


def test_selector_parsing():
    assert parse_selector("role=dbms") == [["role", "eq", "dbms"]]
    assert parse_selector("role!=web") == [["role", "neq", "web"]]
    assert parse_selector("client_name in A|B") == [["client_name", "in", ["A", "B"]]]
    assert parse_selector("role=dbms,tags.zone=x") == \
        [["role", "eq", "dbms"], ["tags.zone", "eq", "x"]]
    with pytest.raises(Exception):
        parse_selector("bogus clause")


def test_tickets_flow(stack, capsys):
    import requests
    created = requests.post(
        f"{stack.core_url}/v1/tickets",
        json={"title": "cli ticket", "severity": "major",
              "attributes": {"server": "s1", "application": "erp",
                             "client": "c", "occurred_at": "1"}}).json()
    tid = created["ticket_id"]
    assert run_cli(stack, "tickets", "list") == 0
    assert tid in capsys.readouterr().out
    assert run_cli(stack, "tickets", "show", tid) == 0
    assert "cli ticket" in capsys.readouterr().out
    assert run_cli(stack, "tickets", "comment", tid, "from the cli") == 0
    capsys.readouterr()
    assert run_cli(stack, "tickets", "move", tid, "in_progress") == 0
    capsys.readouterr()
    assert run_cli(stack, "tickets", "move", tid, "closed") == 1  # illegal edge
    assert "allowed" in capsys.readouterr().err


def test_alerts_list_and_test(stack, tmp_path, capsys):
    from miniops.records import MetricPoint, SeriesKey
    stack.core.metrics.write_points([
        MetricPoint(SeriesKey.of("cli.cpu", server="s1"), 5000, 99.0)])
    rule = {
        "rule_id": "cli-rule",
        "source": 'SELECT last(value) FROM "cli.cpu" WHERE ts >= 0 AND ts < 99999',
        "comparator": ">", "threshold": 90, "severity": "critical",
    }
    path = tmp_path / "rule.json"
    path.write_text(json.dumps(rule))
    assert run_cli(stack, "alerts", "test", str(path)) == 0
    out = capsys.readouterr().out
    assert "firing" in out
    assert run_cli(stack, "alerts", "list") == 0


def test_sim_run_with_report(stack, tmp_path, capsys):
    scenario = {
        "seed": 3, "server_count": 2,
        "generators": [{"metric": "sim.cli", "kind": "constant", "params": {"value": 1.0}}],
        "tick_interval_ms": 1000, "duration_ticks": 5,
    }
    scenario_path = tmp_path / "scenario.json"
    scenario_path.write_text(json.dumps(scenario))
    report_path = tmp_path / "report.json"
    assert run_cli(stack, "sim", "run", str(scenario_path),
                   "--report", str(report_path)) == 0
    report = json.loads(report_path.read_text())
    assert report["produced"] == 10
    assert report["reconciled"] is True
    assert "produced=10" in capsys.readouterr().out
