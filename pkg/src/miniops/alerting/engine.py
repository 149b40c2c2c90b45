"""Rule evaluation, instance state machine, and fire-once action dispatch.

Instance lifecycle: pending -> firing -> resolved, with pending -> resolved
when the breach clears before ``for_duration`` elapses. A breach must hold
at every evaluation inside the window (evaluation ticks are the only
observable). Actions run exactly once per instance, at fire time, keyed by
(rule, group, fired_at) so crash-retry of dispatch cannot duplicate them.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace
from typing import Optional, Protocol

from ..tsstore.sql import Query, parse_query
from .forecast import DegenerateWindow, days_to_saturation, fit_trend
from .rules import AlertInstance, AlertRule

logger = logging.getLogger(__name__)


class StoreUnavailable(Exception):
    pass


class StoreClient(Protocol):
    def query(self, q: Query) -> list[tuple[tuple[str, ...], int, float]]:
        """Run a query; raise StoreUnavailable when the store cannot answer."""


class IncidentSink(Protocol):
    def create_from_alert(self, fire_key: str, title: str, description: str,
                          attributes: dict, severity: str, team_hint: str) -> str: ...

    def alert_resolved(self, fire_key: str, at: int) -> None: ...


@dataclass(frozen=True)
class Transition:
    rule_id: str
    group: tuple[str, ...]
    old_state: Optional[str]
    new_state: str
    at: int
    value: float


@dataclass
class PendingAction:
    fire_key: str
    title: str
    description: str
    attributes: dict
    severity: str
    team_hint: str


class Dispatcher:
    """Performs create_incident actions at most once per instance.

    Failed dispatches stay queued under their idempotency key and are
    retried; the incident service's own idempotency makes retries safe
    even if a crash loses the local done-set.
    """

    def __init__(self, sink: IncidentSink):
        self.sink = sink
        self._done: set[str] = set()
        self._pending: dict[str, PendingAction] = {}
        self._lock = threading.Lock()

    def submit(self, action: PendingAction) -> None:
        with self._lock:
            if action.fire_key in self._done or action.fire_key in self._pending:
                return
            self._pending[action.fire_key] = action
        self.retry_pending()

    def retry_pending(self) -> int:
        """Attempt every queued action; returns how many remain queued."""
        with self._lock:
            queue = list(self._pending.values())
        for action in queue:
            try:
                self.sink.create_from_alert(action.fire_key, action.title,
                                            action.description, action.attributes,
                                            action.severity, action.team_hint)
            except Exception as exc:
                logger.warning("incident dispatch failed, kept queued: %s", exc)
                continue
            with self._lock:
                self._done.add(action.fire_key)
                self._pending.pop(action.fire_key, None)
        with self._lock:
            return len(self._pending)

    def notify_resolved(self, fire_key: str, at: int) -> None:
        try:
            self.sink.alert_resolved(fire_key, at)
        except Exception as exc:
            logger.warning("resolution notification failed: %s", exc)


class AlertEngine:
    def __init__(self, store: StoreClient, dispatcher: Optional[Dispatcher] = None,
                 forecast_window_days: int = 14, slope_epsilon: float = 1e-9):
        self.store = store
        self.dispatcher = dispatcher
        self.forecast_window_days = forecast_window_days
        self.slope_epsilon = slope_epsilon
        self._lock = threading.RLock()
        self.rules: dict[str, AlertRule] = {}
        self.open_instances: dict[str, AlertInstance] = {}
        self.history: list[AlertInstance] = []
        self.skipped_evaluations = 0
        self._last_eval: dict[str, int] = {}

    # -- rule CRUD -----------------------------------------------------------

    def put_rule(self, rule: AlertRule) -> None:
        with self._lock:
            self.rules[rule.rule_id] = rule

    def delete_rule(self, rule_id: str) -> bool:
        with self._lock:
            return self.rules.pop(rule_id, None) is not None

    def list_rules(self) -> list[AlertRule]:
        with self._lock:
            return sorted(self.rules.values(), key=lambda r: r.rule_id)

    def instances(self, state: Optional[str] = None) -> list[AlertInstance]:
        with self._lock:
            out = list(self.open_instances.values()) + list(self.history)
        if state is not None:
            out = [i for i in out if i.state == state]
        return sorted(out, key=lambda i: (i.rule_id, i.group, i.first_breach_at))

    # -- evaluation ------------------------------------------------------------

    def _source_query(self, rule: AlertRule, now: int) -> Query:
        q = parse_query(rule.source)
        if rule.lookback_s is not None:
            q = replace(q, from_ms=now - rule.lookback_s * 1000, to_ms=now)
        return q

    def _group_values(self, rule: AlertRule, now: int) -> dict[tuple[str, ...], float]:
        """One value per group: the latest bucket, or days-to-saturation."""
        rows = self.store.query(self._source_query(rule, now))
        by_group: dict[tuple[str, ...], list[tuple[int, float]]] = {}
        for group, bucket, value in rows:
            by_group.setdefault(group, []).append((bucket, value))
        out: dict[tuple[str, ...], float] = {}
        for group, buckets in by_group.items():
            buckets.sort()
            if rule.forecast_bound is None:
                out[group] = buckets[-1][1]
            else:
                try:
                    fit = fit_trend(buckets)
                except DegenerateWindow as exc:
                    logger.info("rule %s group %s: degenerate window (%s), skipped",
                                rule.rule_id, group, exc)
                    continue
                out[group] = days_to_saturation(fit, now, rule.forecast_bound,
                                                self.slope_epsilon)
        return out

    def evaluate_rule(self, rule: AlertRule, now: int) -> list[Transition]:
        """One evaluation tick for one rule; returns the state transitions."""
        if not rule.enabled:
            return []
        try:
            values = self._group_values(rule, now)
        except StoreUnavailable as exc:
            with self._lock:
                self.skipped_evaluations += 1
            logger.warning("rule %s: store unavailable, evaluation skipped: %s",
                           rule.rule_id, exc)
            return []

        transitions: list[Transition] = []
        with self._lock:
            mine = {key: inst for key, inst in self.open_instances.items()
                    if inst.rule_id == rule.rule_id}
            seen_groups = set()
            for group, value in values.items():
                seen_groups.add(group)
                key = f"{rule.rule_id}|{','.join(group)}"
                instance = mine.get(key)
                breach = rule.breaches(value)
                if breach:
                    if instance is None:
                        instance = AlertInstance(rule.rule_id, group, "pending",
                                                 first_breach_at=now, last_value=value)
                        self.open_instances[key] = instance
                        transitions.append(Transition(rule.rule_id, group, None,
                                                      "pending", now, value))
                    instance.last_value = value
                    if (instance.state == "pending"
                            and now - instance.first_breach_at >= rule.for_duration_s * 1000):
                        instance.state = "firing"
                        instance.fired_at = now
                        transitions.append(Transition(rule.rule_id, group, "pending",
                                                      "firing", now, value))
                        self._fire_actions(rule, instance)
                elif instance is not None:
                    transitions.append(self._resolve(instance, now, value))
            # groups that vanished from the result are no longer breaching
            for key, instance in mine.items():
                if instance.group not in seen_groups and key in self.open_instances:
                    transitions.append(self._resolve(instance, now, instance.last_value))
        return transitions

    def _resolve(self, instance: AlertInstance, now: int, value: float) -> Transition:
        old = instance.state
        instance.state = "resolved"
        instance.resolved_at = now
        instance.last_value = value
        key = f"{instance.rule_id}|{','.join(instance.group)}"
        self.open_instances.pop(key, None)
        self.history.append(instance)
        if old == "firing" and self.dispatcher is not None:
            self.dispatcher.notify_resolved(instance.fire_key, now)
        return Transition(instance.rule_id, instance.group, old, "resolved", now, value)

    def _fire_actions(self, rule: AlertRule, instance: AlertInstance) -> None:
        if self.dispatcher is None:
            return
        for action in rule.actions:
            if action.type != "create_incident":
                continue
            server = _group_tag(rule, instance, "server") or "unknown"
            metric = parse_query(rule.source).metric
            value_str = f"{instance.last_value:g}"
            title = action.title_template.format(server=server, metric=metric,
                                                 value=value_str)
            attributes = {
                "server": server,
                "application": action.attributes.get("application", metric),
                "client": action.attributes.get("client",
                                                _group_tag(rule, instance, "client") or "unknown"),
                "occurred_at": str(instance.fired_at),
            }
            attributes.update(action.attributes)
            self.dispatcher.submit(PendingAction(
                fire_key=instance.fire_key,
                title=title,
                description=f"rule {rule.rule_id}: {rule.source} "
                            f"{rule.comparator} {rule.threshold:g}",
                attributes=attributes,
                severity=rule.severity.name,
                team_hint=action.team_hint,
            ))

    def evaluate_due(self, now: int) -> list[Transition]:
        """Evaluate every enabled rule whose eval_every interval elapsed."""
        with self._lock:
            due = [r for r in self.rules.values()
                   if r.enabled and now - self._last_eval.get(r.rule_id, -10**18)
                   >= r.eval_every_s * 1000]
            for rule in due:
                self._last_eval[rule.rule_id] = now
        transitions = []
        for rule in due:
            transitions.extend(self.evaluate_rule(rule, now))
        return transitions


def _group_tag(rule: AlertRule, instance: AlertInstance, tag: str) -> Optional[str]:
    group_by = parse_query(rule.source).group_by
    for name, value in zip(group_by, instance.group):
        if name == tag:
            return value
    return None
