"""Fleet registry: selectors, plan/unplan, version monotonicity, execution logs."""

import random

import pytest

from miniops.agent.tasks import CollectionTask
from miniops.controlplane import (
    ControlPlane,
    ControlPlaneError,
    ExecutionLog,
    ServerDescriptor,
    TargetSelector,
    TaskTemplate,
)
from miniops.tsstore.store import MetadataStore


@pytest.fixture
def plane(tmp_path):
    return ControlPlane(MetadataStore(tmp_path / "meta.json"))


def ping_task(task_id="ping"):
    return CollectionTask(task_id, "http_probe", {"url": "http://x/", "metric": "ping"},
                          period_seconds=600, output_topic="metrics.ping")


def template(template_id, selector=TargetSelector(), task=None):
    return TaskTemplate(template_id, task or ping_task(task_id=template_id),
                        selector=selector)


def server(server_id, role="web", client="acme", **tags):
    return ServerDescriptor(server_id, client, role, tags)


def test_register_new_server(plane):
    plane.register_agent(server("s1", role="dbms"))
    assert [s.server_id for s in plane.servers()] == ["s1"]
    assert plane.get_server("s1").role == "dbms"


def test_register_1000_servers(plane):
    for i in range(1000):
        plane.register_agent(server(f"s{i}"))
    assert len(plane.servers()) == 1000


def test_reregister_bumps_version_iff_membership_changes(plane):
    plane.register_agent(server("s1", role="web"))
    plane.plan_task(template("dbms-only", TargetSelector((("role", "eq", "dbms"),))))
    v0 = plane.compile_config("s1").version
    # tag change, no membership change: version stays
    plane.register_agent(server("s1", role="web", zone="a"))
    assert plane.compile_config("s1").version == v0
    # role change flips selector membership: version bumps
    plane.register_agent(server("s1", role="dbms"))
    v1 = plane.compile_config("s1").version
    assert v1 == v0 + 1
    assert [t.task_id for t in plane.compile_config("s1").tasks] == ["dbms-only"]


def test_plan_all_servers(plane):
    for i in range(50):
        plane.register_agent(server(f"s{i}"))
    assert plane.plan_task(template("ping-all")) == 50


def test_plan_dbms_subset(plane):
    for i in range(50):
        plane.register_agent(server(f"s{i}", role="dbms" if i < 10 else "web"))
    affected = plane.plan_task(template("table-size", TargetSelector((("role", "eq", "dbms"),))))
    assert affected == 10


def test_plan_matching_none_still_stored(plane):
    plane.register_agent(server("s1"))
    affected = plane.plan_task(template("t", TargetSelector((("role", "eq", "mainframe"),))))
    assert affected == 0
    assert [t.template_id for t in plane.templates()] == ["t"]


def test_duplicate_plan_rejected(plane):
    plane.plan_task(template("t"))
    with pytest.raises(ControlPlaneError):
        plane.plan_task(template("t"))


def test_unplan(plane):
    for i in range(50):
        plane.register_agent(server(f"s{i}"))
    plane.plan_task(template("ping"))
    assert plane.unplan_task("ping") == 50
    with pytest.raises(ControlPlaneError):
        plane.unplan_task("ping")
    with pytest.raises(ControlPlaneError):
        plane.unplan_task("never-existed")


def test_plan_unplan_plan_roundtrip_version_monotone(plane):
    plane.register_agent(server("s1"))
    versions = [plane.compile_config("s1").version]
    plane.plan_task(template("t"))
    versions.append(plane.compile_config("s1").version)
    plane.unplan_task("t")
    versions.append(plane.compile_config("s1").version)
    plane.plan_task(template("t"))
    versions.append(plane.compile_config("s1").version)
    assert versions == sorted(versions) and len(set(versions)) == 4
    assert [t.task_id for t in plane.compile_config("s1").tasks] == ["t"]


def test_resolve_targets_empty_conjunction(plane):
    for i in range(5):
        plane.register_agent(server(f"s{i}"))
    assert len(plane.resolve_targets(TargetSelector())) == 5


def test_resolve_targets_role_eq(plane):
    plane.register_agent(server("db1", role="dbms"))
    plane.register_agent(server("web1", role="web"))
    hits = plane.resolve_targets(TargetSelector((("role", "eq", "dbms"),)))
    assert [s.server_id for s in hits] == ["db1"]


def test_resolve_targets_conjunction_intersection(plane):
    plane.register_agent(server("a", role="dbms", client="A"))
    plane.register_agent(server("b", role="dbms", client="C"))
    plane.register_agent(server("c", role="web", client="A"))
    selector = TargetSelector((("role", "eq", "dbms"), ("client_name", "in", ("A", "B"))))
    assert [s.server_id for s in plane.resolve_targets(selector)] == ["a"]


def test_selector_set_filter_oracle(plane):
    rng = random.Random(9)
    fleet = []
    for i in range(200):
        s = server(f"s{i}", role=rng.choice(["dbms", "web", "erp"]),
                   client=rng.choice(["A", "B", "C"]), zone=rng.choice(["x", "y"]))
        fleet.append(s)
        plane.register_agent(s)
    selector = TargetSelector((("role", "neq", "web"), ("tags.zone", "eq", "x")))
    expected = sorted(s.server_id for s in fleet if s.role != "web" and s.tags["zone"] == "x")
    assert [s.server_id for s in plane.resolve_targets(selector)] == expected


def test_unknown_selector_field_errors():
    with pytest.raises(ControlPlaneError):
        TargetSelector((("hostname", "eq", "x"),))


def test_compile_config_unknown_agent(plane):
    with pytest.raises(ControlPlaneError):
        plane.compile_config("ghost")


def test_compile_config_deterministic(plane):
    plane.register_agent(server("s1", role="dbms"))
    for tid, role in [("a", "dbms"), ("b", "web"), ("c", "dbms")]:
        plane.plan_task(template(tid, TargetSelector((("role", "eq", role),))))
    one = plane.compile_config("s1")
    two = plane.compile_config("s1")
    assert one == two
    assert [t.task_id for t in one.tasks] == ["a", "c"]


def test_toggle_template_version_plus_two(plane):
    plane.register_agent(server("s1"))
    plane.plan_task(template("t"))
    v = plane.compile_config("s1").version
    plane.unplan_task("t")
    plane.plan_task(template("t"))
    assert plane.compile_config("s1").version == v + 2


def test_membership_oracle_on_random_fleets(plane):
    rng = random.Random(17)
    fleet = []
    for i in range(60):
        s = server(f"s{i}", role=rng.choice(["dbms", "web"]), client=rng.choice(["A", "B"]))
        fleet.append(s)
        plane.register_agent(s)
    templates = []
    for i in range(8):
        sel = TargetSelector(tuple(
            p for p in [("role", "eq", rng.choice(["dbms", "web"]))]
            if rng.random() < 0.8
        ))
        t = template(f"t{i}", sel)
        templates.append(t)
        plane.plan_task(t)
    plane.unplan_task("t3")
    for s in fleet:
        expected = sorted(
            t.template_id for t in templates
            if t.template_id != "t3" and t.selector.matches(s)
        )
        got = sorted(task.task_id for task in plane.compile_config(s.server_id).tasks)
        assert got == expected


def test_execution_log_query_window(plane):
    for i in range(100):
        plane.record_execution(ExecutionLog("t", f"s{i % 3}", started_at=i * 10,
                                            outcome="ok", duration_ms=5))
    window = plane.query_executions(task_id="t", from_ms=100, to_ms=500)
    assert len(window) == 40
    assert plane.query_executions(from_ms=10_000, to_ms=20_000) == []
    by_server = plane.query_executions(server_id="s0")
    assert all(log.server_id == "s0" for log in by_server)


def test_state_survives_restart(tmp_path):
    meta_path = tmp_path / "meta.json"
    plane = ControlPlane(MetadataStore(meta_path))
    plane.register_agent(server("s1", role="dbms"))
    plane.plan_task(template("t"))
    plane.record_execution(ExecutionLog("t", "s1", 1, "ok", 2))
    v = plane.compile_config("s1").version

    reopened = ControlPlane(MetadataStore(meta_path))
    assert reopened.compile_config("s1").version == v
    assert [t.task_id for t in reopened.compile_config("s1").tasks] == ["t"]
    assert len(reopened.query_executions()) == 1
