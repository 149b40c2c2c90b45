"""Admin CLI: drive the whole stack through the gateway.

Subcommands: serve, agent, fleet, alerts, tickets, query, sim, health.
Exit codes: 0 success, 1 user error (bad input, rejected request),
2 transport error (gateway or upstream unreachable).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional

import requests

DEFAULT_GATEWAY = "http://127.0.0.1:8800"


class UserError(Exception):
    pass


class TransportFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise UserError(f"{message}\n{self.format_usage()}")


class ApiClient:
    def __init__(self, base_url: str, token: str):
        self.base = base_url.rstrip("/")
        self.session = requests.Session()
        if token:
            self.session.headers["Authorization"] = f"Bearer {token}"

    def request(self, method: str, path: str, **kwargs) -> dict:
        try:
            resp = self.session.request(method, f"{self.base}{path}", timeout=60, **kwargs)
        except requests.RequestException as exc:
            raise TransportFailure(f"cannot reach {self.base}: {exc.__class__.__name__}")
        if resp.status_code == 502:
            raise TransportFailure(resp.json().get("error", "upstream unavailable"))
        if resp.status_code >= 400:
            try:
                body = resp.json()
                message = body.get("error", resp.text)
                if "column" in body:
                    message += f" (column {body['column']})"
            except ValueError:
                message = resp.text
            raise UserError(f"{resp.status_code}: {message}")
        return resp.json()

    def get(self, path: str, **kwargs) -> dict:
        return self.request("GET", path, **kwargs)

    def post(self, path: str, payload: dict) -> dict:
        return self.request("POST", path, json=payload)

    def delete(self, path: str) -> dict:
        return self.request("DELETE", path)


def _print_table(rows: list[list], headers: list[str]) -> None:
    table = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    for i, row in enumerate(table):
        print("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if i == 0:
            print("  ".join("-" * width for width in widths))


def _emit(args, doc: dict, human) -> None:
    if args.json:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        human(doc)


def parse_selector(text: str) -> list[list]:
    """role=dbms,client_name in A|B,tags.zone!=x -> predicate list."""
    predicates = []
    text = text.strip()
    if not text:
        return predicates
    for clause in text.split(","):
        clause = clause.strip()
        if " in " in clause:
            fld, values = clause.split(" in ", 1)
            predicates.append([fld.strip(), "in", [v.strip() for v in values.split("|")]])
        elif "!=" in clause:
            fld, value = clause.split("!=", 1)
            predicates.append([fld.strip(), "neq", value.strip()])
        elif "=" in clause:
            fld, value = clause.split("=", 1)
            predicates.append([fld.strip(), "eq", value.strip()])
        else:
            raise UserError(f"cannot parse selector clause {clause!r}")
    return predicates


def _load_json_file(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UserError(f"{path} is not valid JSON: {exc}")


# -- subcommand implementations ---------------------------------------------


def cmd_serve(args) -> int:
    from .runtime import ServiceStack

    stack = ServiceStack(
        args.data_dir,
        token=args.token,
        pump_interval_s=0.05,
        maintenance_interval_s=1.0,
        static_dir=args.console_dir,
        core_port=args.core_port,
        gateway_port=args.port,
    )
    stack.start()
    print(f"core     listening on {stack.core_url}")
    print(f"gateway  listening on {stack.gateway_url}")
    print(f"data dir {args.data_dir}")
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        print("shutting down")
        stack.stop()
    return 0


def cmd_agent(args) -> int:
    from .agent.daemon import AgentConfig, AgentDaemon

    daemon = AgentDaemon(AgentConfig(
        agent_id=args.agent_id,
        controlplane_url=args.controlplane_url,
        ingester_url=args.ingester_url,
        spool_dir=args.spool_dir,
        spool_capacity=args.spool_capacity,
        tick_s=args.tick_s,
        config_poll_s=args.config_poll_s,
    ))
    try:
        daemon.run_forever()
    except KeyboardInterrupt:
        daemon.stop()
    return 0


def cmd_fleet(args, client: ApiClient) -> int:
    if args.fleet_cmd == "plan":
        doc = _load_json_file(args.template)
        result = client.post("/api/templates", doc)
        _emit(args, result, lambda d: print(
            f"planned {d['template_id']}: {d['affected']} agent(s) affected"))
    elif args.fleet_cmd == "unplan":
        result = client.delete(f"/api/templates/{args.template_id}")
        _emit(args, result, lambda d: print(
            f"unplanned {d['template_id']}: {d['affected']} agent(s) affected"))
    elif args.fleet_cmd == "list":
        result = client.get("/api/templates")
        _emit(args, result, lambda d: _print_table(
            [[t["template_id"], t["task"]["kind"], t["task"]["period_seconds"],
              t["enabled"], json.dumps(t["selector"])] for t in d["templates"]],
            ["template", "kind", "period_s", "enabled", "selector"]))
    elif args.fleet_cmd == "targets":
        selector = parse_selector(args.selector)
        result = client.post("/api/targets/resolve", {"selector": selector})
        _emit(args, result, lambda d: _print_table(
            [[s["server_id"], s["role"], s["client_name"]] for s in d["servers"]],
            ["server", "role", "client"]))
    return 0


def cmd_alerts(args, client: ApiClient) -> int:
    if args.alerts_cmd == "list":
        rules = client.get("/api/rules")
        alerts = client.get("/api/alerts")
        doc = {**rules, **alerts}
        def human(d):
            _print_table(
                [[r["rule_id"], r["comparator"], r["threshold"], r["severity"],
                  "on" if r["enabled"] else "off"] for r in d["rules"]],
                ["rule", "cmp", "threshold", "severity", "state"])
            firing = [a for a in d["alerts"] if a["state"] == "firing"]
            print(f"\n{len(firing)} firing / {len(d['alerts'])} total instances")
        _emit(args, doc, human)
    elif args.alerts_cmd == "test":
        rule_doc = _load_json_file(args.rule_file)
        result = client.post("/api/rules/test", {"rule": rule_doc})
        def human(d):
            if not d["transitions"]:
                print("no transitions")
            for t in d["transitions"]:
                group = ",".join(t["group"]) or "(all)"
                print(f"{t['rule_id']} [{group}] {t['old_state']} -> {t['new_state']}"
                      f" value={t['value']:g}")
        _emit(args, result, human)
    return 0


def cmd_tickets(args, client: ApiClient) -> int:
    if args.tickets_cmd == "list":
        path = f"/api/teams/{args.team}/queue" if args.team else "/api/tickets"
        result = client.get(path)
        _emit(args, result, lambda d: _print_table(
            [[t["ticket_id"], t["severity"], t["status"], t["team"], t["title"]]
             for t in d["tickets"]],
            ["ticket", "severity", "status", "team", "title"]))
    elif args.tickets_cmd == "show":
        ticket = client.get(f"/api/tickets/{args.ticket_id}")
        def human(t):
            print(f"{t['ticket_id']}  [{t['severity']}/{t['status']}]  {t['title']}")
            print(f"team: {t['team']}  assignee: {t['assignee'] or '-'}")
            for key, value in t["attributes"].items():
                print(f"  {key}: {value}")
            print("comments:")
            for c in t["comments"]:
                print(f"  [{c['ts']}] {c['author']}: {c['text']}")
        _emit(args, ticket, human)
    elif args.tickets_cmd == "comment":
        result = client.post(f"/api/tickets/{args.ticket_id}/comments",
                             {"author": args.author, "text": args.text})
        _emit(args, result, lambda t: print(f"comment added to {t['ticket_id']}"))
    elif args.tickets_cmd == "move":
        result = client.post(f"/api/tickets/{args.ticket_id}/transition",
                             {"status": args.status, "actor": args.actor})
        _emit(args, result, lambda t: print(f"{t['ticket_id']} -> {t['status']}"))
    return 0


def cmd_query(args, client: ApiClient) -> int:
    result = client.post("/api/query", {"sql": args.sql})
    _emit(args, result, lambda d: _print_table(d["rows"], d["columns"]))
    return 0


def cmd_sim(args, client: ApiClient) -> int:
    from .fleetsim import Scenario, run_scenario

    scenario = Scenario.from_json(_load_json_file(args.scenario))
    try:
        report, _ = run_scenario(scenario, client.base, token=args.token,
                                 api_prefix="/api", accel=args.accel)
    except (RuntimeError, TimeoutError) as exc:
        raise TransportFailure(str(exc))
    doc = report.to_json()
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
    _emit(args, doc, lambda d: print(
        f"produced={d['produced']} stored={d['stored']} "
        f"evicted={d['evicted_records']} reconciled={d['reconciled']} "
        f"wall_clock={d['wall_clock_s']}s"))
    return 0


def cmd_health(args, client: ApiClient) -> int:
    result = client.get("/api/health")
    def human(d):
        for name, state in d["subsystems"].items():
            print(f"{name:<14} {state}")
        if "store_partitions" in d:
            print(f"{'partitions':<14} {d['store_partitions']}")
        for topic, lags in d.get("queue_lag", {}).items():
            for group, lag in lags.items():
                print(f"{'lag':<14} {topic} {group}={lag}")
    _emit(args, result, human)
    return 0


def _connection_flags(sub_parser: argparse.ArgumentParser) -> None:
    # SUPPRESS keeps the subparser from clobbering the top-level values
    # when the flag is given before the subcommand
    sub_parser.add_argument("--gateway-url", default=argparse.SUPPRESS)
    sub_parser.add_argument("--token", default=argparse.SUPPRESS)
    sub_parser.add_argument("--json", action="store_true", default=argparse.SUPPRESS)


def build_parser() -> _Parser:
    parser = _Parser(prog="miniops", description=__doc__)
    parser.add_argument("--gateway-url", default=os.environ.get("MINIOPS_GATEWAY_ADDR",
                                                                DEFAULT_GATEWAY))
    parser.add_argument("--token", default=os.environ.get("MINIOPS_TOKEN", ""))
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command")

    serve = sub.add_parser("serve", help="run the full pipeline in the foreground")
    serve.add_argument("--data-dir", default="./miniops-data")
    serve.add_argument("--port", type=int, default=8800, help="gateway port")
    serve.add_argument("--core-port", type=int, default=8801)
    serve.add_argument("--console-dir", default=os.environ.get("MINIOPS_CONSOLE_DIR"))
    serve.add_argument("--token", default=argparse.SUPPRESS)

    agent = sub.add_parser("agent", help="run a collection agent daemon")
    agent.add_argument("--agent-id", required=True)
    agent.add_argument("--controlplane-url", required=True)
    agent.add_argument("--ingester-url", required=True)
    agent.add_argument("--spool-dir", required=True)
    agent.add_argument("--spool-capacity", type=int, default=100)
    agent.add_argument("--tick-s", type=float, default=1.0)
    agent.add_argument("--config-poll-s", type=float, default=60.0)

    fleet = sub.add_parser("fleet", help="plan and target collection tasks")
    fleet_sub = fleet.add_subparsers(dest="fleet_cmd", required=True)
    fleet_sub.add_parser("plan").add_argument("template", help="template JSON file")
    fleet_sub.add_parser("unplan").add_argument("template_id")
    fleet_sub.add_parser("list")
    fleet_sub.add_parser("targets").add_argument(
        "selector", help="e.g. \"role=dbms,client_name in A|B\"")

    alerts = sub.add_parser("alerts", help="alert rules and instances")
    alerts_sub = alerts.add_subparsers(dest="alerts_cmd", required=True)
    alerts_sub.add_parser("list")
    alerts_sub.add_parser("test").add_argument("rule_file", help="rule JSON file")

    tickets = sub.add_parser("tickets", help="incident tickets")
    tickets_sub = tickets.add_subparsers(dest="tickets_cmd", required=True)
    tickets_list = tickets_sub.add_parser("list")
    tickets_list.add_argument("--team", default=None)
    tickets_sub.add_parser("show").add_argument("ticket_id")
    comment = tickets_sub.add_parser("comment")
    comment.add_argument("ticket_id")
    comment.add_argument("text")
    comment.add_argument("--author", default=os.environ.get("USER", "cli"))
    move = tickets_sub.add_parser("move")
    move.add_argument("ticket_id")
    move.add_argument("status")
    move.add_argument("--actor", default=os.environ.get("USER", "cli"))

    query = sub.add_parser("query", help="run a mini-SQL query")
    query.add_argument("sql")

    sim = sub.add_parser("sim", help="fleet simulation")
    sim_sub = sim.add_subparsers(dest="sim_cmd", required=True)
    sim_run = sim_sub.add_parser("run")
    sim_run.add_argument("scenario", help="scenario JSON file")
    sim_run.add_argument("--accel", type=float, default=None,
                         help="virtual-time acceleration (default: unthrottled)")
    sim_run.add_argument("--report", default=None, help="write report JSON here")

    health = sub.add_parser("health", help="per-subsystem status")
    for client_parser in (fleet, alerts, tickets, query, sim, health):
        _connection_flags(client_parser)
    return parser


def cli_main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UserError(parser.format_usage())
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "agent":
            return cmd_agent(args)
        client = ApiClient(args.gateway_url, args.token)
        dispatch = {
            "fleet": cmd_fleet,
            "alerts": cmd_alerts,
            "tickets": cmd_tickets,
            "query": cmd_query,
            "sim": cmd_sim,
            "health": cmd_health,
        }
        return dispatch[args.command](args, client)
    except UserError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return 1
    except TransportFailure as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
