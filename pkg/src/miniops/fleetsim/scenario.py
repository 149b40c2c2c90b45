"""Scenario definitions: synthetic generators and scripted faults.

A scenario is fully determined by its seed: every generator draws from its
own seeded RNG, so two runs of the same scenario produce byte-identical
ledgers. Virtual time starts at a fixed epoch so timestamps are stable too.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

GENERATOR_KINDS = ("constant", "random_walk", "linear_ramp", "sinusoid")
FAULT_KINDS = ("ingester_outage", "agent_pause")

MS_PER_DAY = 86_400_000.0

# fixed virtual epoch: 2026-01-01T00:00:00Z, keeps ledgers reproducible
DEFAULT_T0_MS = 1_767_225_600_000


@dataclass(frozen=True)
class GeneratorSpec:
    metric: str
    kind: str
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")

    def param(self, name: str, default: float = 0.0) -> float:
        for key, value in self.params:
            if key == name:
                return value
        return default

    @classmethod
    def of(cls, metric: str, kind: str, **params: float) -> "GeneratorSpec":
        return cls(metric, kind, tuple(sorted(params.items())))

    def to_json(self) -> dict:
        return {"metric": self.metric, "kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_json(cls, doc: dict) -> "GeneratorSpec":
        return cls.of(doc["metric"], doc["kind"], **doc.get("params", {}))


class Generator:
    """One metric stream for one server, deterministic in (seed, indices)."""

    def __init__(self, spec: GeneratorSpec, seed: int, server_idx: int, gen_idx: int):
        self.spec = spec
        self.rng = random.Random(seed * 1_000_003 + server_idx * 1_009 + gen_idx * 13)
        self.walk_value = spec.param("start", 0.0)

    def value_at(self, t_rel_ms: int) -> float:
        spec = self.spec
        if spec.kind == "constant":
            return spec.param("value", 0.0)
        if spec.kind == "random_walk":
            self.walk_value += self.rng.uniform(-spec.param("step", 1.0),
                                                spec.param("step", 1.0))
            return self.walk_value
        if spec.kind == "linear_ramp":
            noise = spec.param("noise", 0.0)
            eps = self.rng.uniform(-noise, noise) if noise else 0.0
            return (spec.param("start", 0.0)
                    + spec.param("slope_per_day", 0.0) * (t_rel_ms / MS_PER_DAY) + eps)
        # sinusoid
        period_ms = spec.param("period_s", 60.0) * 1000.0
        return (spec.param("offset", 0.0) + spec.param("amplitude", 1.0)
                * math.sin(2.0 * math.pi * t_rel_ms / period_ms))


@dataclass(frozen=True)
class Fault:
    kind: str
    start_ms: int  # relative to scenario start
    end_ms: int
    scope: tuple[str, ...] = ()  # server ids; empty = all

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if not 0 <= self.start_ms < self.end_ms:
            raise ValueError("fault window must satisfy 0 <= start < end")

    def active(self, t_rel_ms: int) -> bool:
        return self.start_ms <= t_rel_ms < self.end_ms

    def applies_to(self, server_id: str) -> bool:
        return not self.scope or server_id in self.scope

    def to_json(self) -> dict:
        return {"type": self.kind, "start_ms": self.start_ms, "end_ms": self.end_ms,
                "scope": list(self.scope)}

    @classmethod
    def from_json(cls, doc: dict) -> "Fault":
        return cls(doc["type"], doc["start_ms"], doc["end_ms"],
                   tuple(doc.get("scope", [])))


@dataclass
class Scenario:
    seed: int
    server_count: int
    generators: list[GeneratorSpec]
    tick_interval_ms: int = 1000
    duration_ticks: int = 60
    faults: list[Fault] = field(default_factory=list)
    t0_ms: int = DEFAULT_T0_MS
    topic: str = "metrics.fleetsim"
    spool_capacity: int = 100

    def __post_init__(self):
        if self.server_count < 1 or self.duration_ticks < 1 or self.tick_interval_ms < 1:
            raise ValueError("server_count, duration_ticks, tick_interval_ms must be >= 1")
        duration_ms = self.duration_ticks * self.tick_interval_ms
        for fault in self.faults:
            if fault.end_ms > duration_ms:
                raise ValueError(f"fault window {fault} exceeds scenario duration")

    @property
    def duration_ms(self) -> int:
        return self.duration_ticks * self.tick_interval_ms

    def server_ids(self) -> list[str]:
        return [f"sim{i:03d}" for i in range(self.server_count)]

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "server_count": self.server_count,
            "generators": [g.to_json() for g in self.generators],
            "tick_interval_ms": self.tick_interval_ms,
            "duration_ticks": self.duration_ticks,
            "faults": [f.to_json() for f in self.faults],
            "t0_ms": self.t0_ms,
            "topic": self.topic,
            "spool_capacity": self.spool_capacity,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Scenario":
        return cls(
            seed=doc["seed"],
            server_count=doc["server_count"],
            generators=[GeneratorSpec.from_json(g) for g in doc["generators"]],
            tick_interval_ms=doc.get("tick_interval_ms", 1000),
            duration_ticks=doc.get("duration_ticks", 60),
            faults=[Fault.from_json(f) for f in doc.get("faults", [])],
            t0_ms=doc.get("t0_ms", DEFAULT_T0_MS),
            topic=doc.get("topic", "metrics.fleetsim"),
            spool_capacity=doc.get("spool_capacity", 100),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_json(json.loads(Path(path).read_text()))


def scripted_saturation(slope_per_day: float, start: float,
                        noise: float = 0.0) -> tuple[GeneratorSpec, float]:
    """A draining linear generator plus its exact saturation day from t0."""
    if slope_per_day >= 0:
        raise ValueError("a draining resource needs slope_per_day < 0")
    spec = GeneratorSpec.of("fleet.disk.free_gb", "linear_ramp",
                            start=start, slope_per_day=slope_per_day, noise=noise)
    return spec, start / abs(slope_per_day)
