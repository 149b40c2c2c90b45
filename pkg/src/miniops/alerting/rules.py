"""Alert rule and instance types.

A rule's source is mini-SQL whose result yields one latest value per
group (use agg ``last`` or a single bucket); when ``lookback_s`` is set the
engine slides the source's time range to [now - lookback, now) at each
evaluation. Setting ``forecast_bound`` turns the rule into a saturation
forecast: the source's bucketed values per group become the fit window
and the comparator applies to days-to-saturation instead of the raw value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from ..tsstore.sql import parse_query

COMPARATORS = (">", ">=", "<", "<=")


class Severity(enum.IntEnum):
    info = 0
    minor = 1
    major = 2
    critical = 3

    @classmethod
    def parse(cls, name: str) -> "Severity":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown severity {name!r}") from None


@dataclass
class ActionSpec:
    type: str  # create_incident | log_only
    team_hint: str = ""
    title_template: str = "{metric} breach on {server}: {value}"
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.type not in ("create_incident", "log_only"):
            raise ValueError(f"unknown action type {self.type!r}")

    def to_json(self) -> dict:
        return {"type": self.type, "team_hint": self.team_hint,
                "title_template": self.title_template, "attributes": dict(self.attributes)}

    @classmethod
    def from_json(cls, doc: dict) -> "ActionSpec":
        return cls(doc["type"], doc.get("team_hint", ""),
                   doc.get("title_template", "{metric} breach on {server}: {value}"),
                   dict(doc.get("attributes", {})))


@dataclass
class AlertRule:
    rule_id: str
    source: str
    comparator: str
    threshold: float
    severity: Severity = Severity.major
    for_duration_s: int = 0
    eval_every_s: int = 60
    actions: list[ActionSpec] = field(default_factory=list)
    enabled: bool = True
    lookback_s: Optional[int] = None
    forecast_bound: Optional[float] = None

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")
        if self.eval_every_s < 1:
            raise ValueError("eval_every_s must be >= 1")
        if self.for_duration_s < 0:
            raise ValueError("for_duration_s must be non-negative")
        parse_query(self.source)  # source must parse under the store grammar

    def breaches(self, value: float) -> bool:
        if self.comparator == ">":
            return value > self.threshold
        if self.comparator == ">=":
            return value >= self.threshold
        if self.comparator == "<":
            return value < self.threshold
        return value <= self.threshold

    def to_json(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "source": self.source,
            "comparator": self.comparator,
            "threshold": self.threshold,
            "severity": self.severity.name,
            "for_duration_s": self.for_duration_s,
            "eval_every_s": self.eval_every_s,
            "actions": [a.to_json() for a in self.actions],
            "enabled": self.enabled,
            "lookback_s": self.lookback_s,
            "forecast_bound": self.forecast_bound,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AlertRule":
        return cls(
            rule_id=doc["rule_id"],
            source=doc["source"],
            comparator=doc["comparator"],
            threshold=float(doc["threshold"]),
            severity=Severity.parse(doc.get("severity", "major")),
            for_duration_s=doc.get("for_duration_s", 0),
            eval_every_s=doc.get("eval_every_s", 60),
            actions=[ActionSpec.from_json(a) for a in doc.get("actions", [])],
            enabled=doc.get("enabled", True),
            lookback_s=doc.get("lookback_s"),
            forecast_bound=doc.get("forecast_bound"),
        )


@dataclass
class AlertInstance:
    rule_id: str
    group: tuple[str, ...]
    state: str  # pending | firing | resolved
    first_breach_at: int
    fired_at: Optional[int] = None
    resolved_at: Optional[int] = None
    last_value: float = 0.0

    @property
    def key(self) -> str:
        return f"{self.rule_id}|{','.join(self.group)}"

    @property
    def fire_key(self) -> str:
        """Idempotency key for actions: rule, group, and fire time."""
        return f"{self.key}|{self.fired_at}"

    def to_json(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "group": list(self.group),
            "state": self.state,
            "first_breach_at": self.first_breach_at,
            "fired_at": self.fired_at,
            "resolved_at": self.resolved_at,
            "last_value": self.last_value if math.isfinite(self.last_value) else None,
        }
