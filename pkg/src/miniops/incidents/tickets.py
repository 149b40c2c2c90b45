"""Ticket model and status machine.

Lifecycle: new -> triaged -> in_progress -> resolved -> closed, plus the
reopen edge resolved -> in_progress. Every status change appends an audit
comment ("status: X->Y by actor"), so the full history replays from the
comment list alone. Comments are append-only and never edited.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

STATUSES = ("new", "triaged", "in_progress", "resolved", "closed")

ALLOWED_TRANSITIONS = frozenset({
    ("new", "triaged"),
    ("triaged", "in_progress"),
    ("in_progress", "resolved"),
    ("resolved", "closed"),
    ("resolved", "in_progress"),  # reopen
})

REQUIRED_ATTRIBUTES = ("server", "application", "client", "occurred_at")

_AUDIT_RE = re.compile(r"^status: (\w+)->(\w+) by (.+)$")


class IncidentError(Exception):
    def __init__(self, message: str, status: int = 400):
        super().__init__(message)
        self.status = status


def allowed_successors(status: str) -> list[str]:
    return sorted(b for a, b in ALLOWED_TRANSITIONS if a == status)


@dataclass(frozen=True)
class Comment:
    ts: int
    author: str
    text: str

    def to_json(self) -> dict:
        return {"ts": self.ts, "author": self.author, "text": self.text}

    @classmethod
    def from_json(cls, doc: dict) -> "Comment":
        return cls(doc["ts"], doc["author"], doc["text"])


@dataclass
class IncidentTicket:
    ticket_id: str
    title: str
    description: str
    attributes: dict[str, str]
    severity: str
    status: str = "new"
    team: str = ""
    assignee: Optional[str] = None
    source: dict = field(default_factory=lambda: {"type": "manual"})
    comments: list[Comment] = field(default_factory=list)
    created_at: int = 0
    revision: int = 0

    def validate_attributes(self) -> None:
        missing = [k for k in REQUIRED_ATTRIBUTES if k not in self.attributes]
        if missing:
            raise IncidentError(f"missing required attribute(s): {', '.join(missing)}")

    def append_comment(self, author: str, text: str, now: int) -> Comment:
        if self.status == "closed":
            raise IncidentError("ticket is closed; comments are frozen", status=409)
        ts = max(now, self.comments[-1].ts) if self.comments else now
        comment = Comment(ts, author, text)
        self.comments.append(comment)
        return comment

    def to_json(self) -> dict:
        return {
            "ticket_id": self.ticket_id,
            "title": self.title,
            "description": self.description,
            "attributes": dict(self.attributes),
            "severity": self.severity,
            "status": self.status,
            "team": self.team,
            "assignee": self.assignee,
            "source": dict(self.source),
            "comments": [c.to_json() for c in self.comments],
            "created_at": self.created_at,
            "revision": self.revision,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "IncidentTicket":
        return cls(
            ticket_id=doc["ticket_id"],
            title=doc["title"],
            description=doc.get("description", ""),
            attributes=dict(doc["attributes"]),
            severity=doc["severity"],
            status=doc.get("status", "new"),
            team=doc.get("team", ""),
            assignee=doc.get("assignee"),
            source=dict(doc.get("source", {"type": "manual"})),
            comments=[Comment.from_json(c) for c in doc.get("comments", [])],
            created_at=doc.get("created_at", 0),
            revision=doc.get("revision", 0),
        )


def transition(ticket: IncidentTicket, new_status: str, actor: str, now: int) -> IncidentTicket:
    """Apply a status change if the machine allows it; audit-comment it."""
    if new_status not in STATUSES:
        raise IncidentError(f"unknown status {new_status!r}")
    if (ticket.status, new_status) not in ALLOWED_TRANSITIONS:
        raise IncidentError(
            f"illegal transition {ticket.status}->{new_status}; "
            f"allowed: {', '.join(allowed_successors(ticket.status)) or 'none'}",
            status=409,
        )
    old = ticket.status
    # audit first: appending to a just-closed ticket would trip the freeze
    ticket.append_comment(actor, f"status: {old}->{new_status} by {actor}", now)
    ticket.status = new_status
    return ticket


def replay_status(comments: list[Comment]) -> str:
    """Reconstruct the final status by replaying audit comments from 'new'."""
    status = "new"
    for comment in comments:
        match = _AUDIT_RE.match(comment.text)
        if match:
            status = match.group(2)
    return status
