"""Incident tickets: creation, triage, ranking, lifecycle, comments."""

from .service import IncidentService, TriageRule
from .tickets import (
    ALLOWED_TRANSITIONS,
    Comment,
    IncidentError,
    IncidentTicket,
    REQUIRED_ATTRIBUTES,
    STATUSES,
    allowed_successors,
    transition,
)

__all__ = [
    "ALLOWED_TRANSITIONS",
    "Comment",
    "IncidentError",
    "IncidentService",
    "IncidentTicket",
    "REQUIRED_ATTRIBUTES",
    "STATUSES",
    "TriageRule",
    "allowed_successors",
    "transition",
]
