"""Deterministic fleet simulator with fault injection and ground truth."""

from .scenario import GeneratorSpec, Scenario, scripted_saturation
from .sim import SimReport, run_scenario

__all__ = ["GeneratorSpec", "Scenario", "SimReport", "run_scenario", "scripted_saturation"]
