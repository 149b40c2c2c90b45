"""Incident service: idempotent creation, rule-based triage, team queues.

Triage is deterministic first-match over an ordered rule list that always
ends in a default (empty-predicate) rule. A rule whose team is the
literal "{hint}" defers to the alert engine's team suggestion, which is
the extension point for an external classifier. Alert-created tickets are
idempotent on the alert instance's fire key: resubmission returns the
existing ticket.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from ..alerting.rules import Severity
from ..tsstore.store import MetadataStore
from .tickets import IncidentError, IncidentTicket, transition as apply_transition


@dataclass(frozen=True)
class TriageRule:
    """Ordered predicate: conjunction over attributes plus severity."""

    predicate: tuple[tuple[str, str], ...]  # (field, expected value)
    team: str

    def matches(self, ticket: IncidentTicket) -> bool:
        for fld, expected in self.predicate:
            actual = ticket.severity if fld == "severity" else ticket.attributes.get(fld)
            if actual != expected:
                return False
        return True

    def to_json(self) -> dict:
        return {"predicate": [list(p) for p in self.predicate], "team": self.team}

    @classmethod
    def from_json(cls, doc: dict) -> "TriageRule":
        return cls(tuple((f, v) for f, v in doc["predicate"]), doc["team"])


DEFAULT_RULES = [TriageRule((), "operations")]


class IncidentService:
    def __init__(self, meta: MetadataStore):
        self.meta = meta
        self._lock = threading.RLock()
        self._ticket_locks: dict[str, threading.Lock] = {}
        if not self.meta.get("triage", "rules"):
            self.set_triage_rules(DEFAULT_RULES)

    # -- triage rules ---------------------------------------------------------

    def set_triage_rules(self, rules: list[TriageRule]) -> None:
        defaults = [i for i, r in enumerate(rules) if not r.predicate]
        if len(defaults) != 1 or defaults[0] != len(rules) - 1:
            raise IncidentError("exactly one default (empty-predicate) rule is "
                                "required, at lowest priority")
        self.meta.put("triage", "rules", [r.to_json() for r in rules])

    def triage_rules(self) -> list[TriageRule]:
        return [TriageRule.from_json(d) for d in self.meta.get("triage", "rules", [])]

    def triage(self, ticket: IncidentTicket, team_hint: str = "",
               now: Optional[int] = None) -> str:
        """First matching rule wins; moves a new ticket to triaged."""
        team = ""
        for rule in self.triage_rules():
            if not rule.matches(ticket):
                continue
            if rule.team == "{hint}":
                if not team_hint:
                    continue  # no suggestion to defer to; try the next rule
                team = team_hint
            else:
                team = rule.team
            break
        ticket.team = team
        if ticket.status == "new":
            apply_transition(ticket, "triaged", "triage", self._now(now))
        return team

    # -- ticket CRUD --------------------------------------------------------------

    def _now(self, now: Optional[int]) -> int:
        return int(time.time() * 1000) if now is None else now

    def _ticket_lock(self, ticket_id: str) -> threading.Lock:
        with self._lock:
            return self._ticket_locks.setdefault(ticket_id, threading.Lock())

    def _persist(self, ticket: IncidentTicket) -> None:
        self.meta.put("tickets", ticket.ticket_id, ticket.to_json())

    def get(self, ticket_id: str) -> IncidentTicket:
        doc = self.meta.get("tickets", ticket_id)
        if doc is None:
            raise IncidentError(f"unknown ticket {ticket_id!r}", status=404)
        return IncidentTicket.from_json(doc)

    def tickets(self, team: Optional[str] = None,
                status: Optional[str] = None) -> list[IncidentTicket]:
        out = [IncidentTicket.from_json(d) for d in self.meta.items("tickets").values()]
        if team is not None:
            out = [t for t in out if t.team == team]
        if status is not None:
            out = [t for t in out if t.status == status]
        return sorted(out, key=lambda t: t.ticket_id)

    def create_ticket(self, title: str, description: str, attributes: dict,
                      severity: str, source: Optional[dict] = None,
                      team_hint: str = "", now: Optional[int] = None,
                      auto_triage: bool = True) -> IncidentTicket:
        """Create (or return the existing) ticket; triage it immediately."""
        Severity.parse(severity)
        source = dict(source or {"type": "manual"})
        now = self._now(now)
        with self._lock:
            if source.get("type") == "alert":
                key = source.get("key")
                if not key:
                    raise IncidentError("alert-sourced tickets need source.key")
                existing_id = self.meta.get("alert_tickets", key)
                if existing_id is not None:
                    return self.get(existing_id)
            counter = int(self.meta.get("counters", "ticket", 0)) + 1
            self.meta.put("counters", "ticket", counter)
            ticket = IncidentTicket(
                ticket_id=f"T-{counter:06d}",
                title=title,
                description=description,
                attributes=dict(attributes),
                severity=severity,
                source=source,
                created_at=now,
            )
            ticket.validate_attributes()
            if auto_triage:
                self.triage(ticket, team_hint=team_hint, now=now)
            ticket.revision = 1
            self._persist(ticket)
            if source.get("type") == "alert":
                self.meta.put("alert_tickets", source["key"], ticket.ticket_id)
            return ticket

    # -- mutations ------------------------------------------------------------------

    def transition(self, ticket_id: str, new_status: str, actor: str,
                   now: Optional[int] = None,
                   expected_revision: Optional[int] = None) -> IncidentTicket:
        with self._ticket_lock(ticket_id):
            ticket = self.get(ticket_id)
            if expected_revision is not None and ticket.revision != expected_revision:
                raise IncidentError(
                    f"revision conflict: expected {expected_revision}, "
                    f"ticket at {ticket.revision}", status=409)
            apply_transition(ticket, new_status, actor, self._now(now))
            ticket.revision += 1
            self._persist(ticket)
            return ticket

    def add_comment(self, ticket_id: str, author: str, text: str,
                    now: Optional[int] = None) -> IncidentTicket:
        with self._ticket_lock(ticket_id):
            ticket = self.get(ticket_id)
            ticket.append_comment(author, text, self._now(now))
            ticket.revision += 1
            self._persist(ticket)
            return ticket

    def assign(self, ticket_id: str, assignee: str,
               now: Optional[int] = None) -> IncidentTicket:
        with self._ticket_lock(ticket_id):
            ticket = self.get(ticket_id)
            ticket.assignee = assignee
            ticket.append_comment("system", f"assigned to {assignee}", self._now(now))
            ticket.revision += 1
            self._persist(ticket)
            return ticket

    # -- queues ----------------------------------------------------------------------

    def rank_queue(self, team: str) -> list[IncidentTicket]:
        """Open tickets by severity (desc) then age (oldest first); stable."""
        open_tickets = [t for t in self.tickets(team=team)
                        if t.status not in ("resolved", "closed")]
        open_tickets.sort(key=lambda t: (-Severity.parse(t.severity), t.created_at,
                                         t.ticket_id))
        return open_tickets

    # -- alert integration (IncidentSink) ----------------------------------------------

    def create_from_alert(self, fire_key: str, title: str, description: str,
                          attributes: dict, severity: str, team_hint: str) -> str:
        ticket = self.create_ticket(
            title=title, description=description, attributes=attributes,
            severity=severity, source={"type": "alert", "key": fire_key},
            team_hint=team_hint,
            now=int(attributes.get("occurred_at", 0)) or None,
        )
        return ticket.ticket_id

    def alert_resolved(self, fire_key: str, at: int) -> Optional[str]:
        """Annotate the linked ticket once per alert instance; no-op without one."""
        ticket_id = self.meta.get("alert_tickets", fire_key)
        if ticket_id is None:
            return None
        text = f"source alert resolved at {at}"
        with self._ticket_lock(ticket_id):
            ticket = self.get(ticket_id)
            if any(c.text == text and c.author == "alert-engine" for c in ticket.comments):
                return ticket_id  # duplicate resolution event
            ticket.append_comment("alert-engine", text, at)
            ticket.revision += 1
            self._persist(ticket)
        return ticket_id
