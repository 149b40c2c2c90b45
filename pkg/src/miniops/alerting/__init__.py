"""Alert engine: threshold rules, saturation forecasts, action dispatch."""

from .engine import AlertEngine, Dispatcher, StoreUnavailable, Transition
from .forecast import TrendFit, days_to_saturation, fit_trend
from .rules import ActionSpec, AlertInstance, AlertRule, Severity

__all__ = [
    "ActionSpec",
    "AlertEngine",
    "AlertInstance",
    "AlertRule",
    "Dispatcher",
    "Severity",
    "StoreUnavailable",
    "TrendFit",
    "Transition",
    "days_to_saturation",
    "fit_trend",
]
