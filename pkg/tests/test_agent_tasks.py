"""Task execution: exec parsing, probes, builtin generators, failure modes."""

import pytest

from miniops.agent.tasks import CollectionTask, run_task


def fixed_clock(ms=1_000_000):
    return lambda: ms


def exec_task(command, parse="scalar", **kwargs):
    defaults = dict(task_id="t1", kind="exec", spec={"command": command, "parse": parse},
                    period_seconds=60, output_topic="metrics.test")
    defaults.update(kwargs)
    return CollectionTask(**defaults)


def test_process_count_pipeline():
    task = exec_task("ps -ef --no-headers | wc -l")
    result = run_task(task, fixed_clock(), "s1")
    assert result.outcome == "ok"
    assert len(result.records) == 1
    record = result.records[0]
    assert record.kind == "metric"
    assert record.value == float(int(record.value))  # a process count is integral
    assert record.value > 0


def test_scalar_parse():
    result = run_task(exec_task("echo 217"), fixed_clock(), "s1")
    assert result.outcome == "ok"
    assert result.records[0].value == 217.0
    assert result.records[0].topic == "metrics.test"
    assert result.records[0].server == "s1"


def test_scalar_parse_failure_is_exec_error():
    result = run_task(exec_task("echo abc"), fixed_clock(), "s1")
    assert result.outcome == "exec_error"
    assert result.records[0].kind == "log"
    assert "abc" in result.records[0].message


def test_nonzero_exit_carries_stderr():
    result = run_task(exec_task("echo broken >&2; exit 3"), fixed_clock(), "s1")
    assert result.outcome == "exec_error"
    assert result.records[0].kind == "log"
    assert result.records[0].level == "ERROR"
    assert "broken" in result.records[0].message


def test_timeout_outcome():
    task = exec_task("sleep 5", timeout_ms=200)
    result = run_task(task, fixed_clock(), "s1")
    assert result.outcome == "timeout"
    assert result.records == []
    assert result.duration_ms >= task.timeout_ms


def test_lines_parse_mode():
    task = exec_task("printf 'a\\nb\\n\\nc\\n'", parse="lines", output_kind="log",
                     output_topic="logs.test")
    result = run_task(task, fixed_clock(), "s1")
    assert result.outcome == "ok"
    assert [r.message for r in result.records] == ["a", "b", "c"]
    assert all(r.kind == "log" for r in result.records)


def test_raw_parse_mode():
    task = exec_task("printf 'line1\\nline2\\n'", parse="raw", output_kind="log")
    result = run_task(task, fixed_clock(), "s1")
    assert len(result.records) == 1
    assert result.records[0].message == "line1\nline2\n"


def test_http_probe_unreachable_listener():
    task = CollectionTask(task_id="ping", kind="http_probe",
                          spec={"url": "http://127.0.0.1:1", "metric": "ping"},
                          period_seconds=600, timeout_ms=500, output_topic="metrics.ping")
    result = run_task(task, fixed_clock(), "s1")
    assert result.outcome == "ok"
    by_name = {r.name: r.value for r in result.records}
    assert by_name["ping.reachable"] == 0.0
    assert "ping.latency_ms" in by_name


def test_http_probe_reachable(tmp_path):
    import http.server
    import threading

    server = http.server.HTTPServer(("127.0.0.1", 0), http.server.SimpleHTTPRequestHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        port = server.server_address[1]
        task = CollectionTask(task_id="ping", kind="http_probe",
                              spec={"url": f"http://127.0.0.1:{port}/", "metric": "ping"},
                              period_seconds=600, timeout_ms=2000, output_topic="metrics.ping")
        result = run_task(task, fixed_clock(), "s1")
        assert result.outcome == "ok"
        by_name = {r.name: r.value for r in result.records}
        assert by_name["ping.reachable"] == 1.0
    finally:
        server.shutdown()


@pytest.mark.parametrize("generator", ["cpu_load", "mem_free_bytes", "disk_free_bytes", "proc_count"])
def test_builtin_generators_emit_one_point(generator):
    task = CollectionTask(task_id=generator, kind="builtin_metric",
                          spec={"generator": generator}, period_seconds=10,
                          output_topic="metrics.host")
    result = run_task(task, fixed_clock(), "s1")
    assert result.outcome == "ok"
    assert len(result.records) == 1
    assert result.records[0].kind == "metric"
    assert result.records[0].name == generator
    assert result.records[0].value >= 0.0


def test_task_validation():
    with pytest.raises(ValueError):
        CollectionTask("t", "exec", {"command": "x"}, period_seconds=0, output_topic="t")
    with pytest.raises(ValueError):
        CollectionTask("t", "exec", {"command": "x"}, period_seconds=10,
                       jitter_seconds=10, output_topic="t")
    with pytest.raises(ValueError):
        CollectionTask("t", "exec", {"command": "x"}, period_seconds=10, output_topic="")
    with pytest.raises(ValueError):
        CollectionTask("t", "sql", {"query": "SELECT 1"}, period_seconds=10, output_topic="t")
    with pytest.raises(ValueError):
        CollectionTask("t", "builtin_metric", {"generator": "nope"}, period_seconds=10,
                       output_topic="t")


def test_task_json_roundtrip():
    task = exec_task("echo 1", jitter_seconds=5)
    assert CollectionTask.from_json(task.to_json()) == task
