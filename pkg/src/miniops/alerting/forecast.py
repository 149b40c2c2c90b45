"""Resource saturation forecasting from a fitted linear trend.

The built-in forecaster is closed-form ordinary least squares with time
measured in days:

    slope     = sum((t - t_mean) * (y - y_mean)) / sum((t - t_mean)^2)
    intercept = y_mean - slope * t_mean

Days-to-saturation extrapolates the fitted line from ``now`` to the
capacity bound. The estimate is finite only when the trend moves from its
operating level (the fitted window mean) toward the bound faster than
``epsilon`` per day; a flat trend or one heading away never saturates,
and a trajectory that already crossed the bound clamps to zero days.
Deep forecasters can replace the OLS fit through the Forecaster protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

MS_PER_DAY = 86_400_000.0


class DegenerateWindow(ValueError):
    pass


@dataclass(frozen=True)
class TrendFit:
    slope_per_day: float
    intercept: float
    # mean sample time of the fitted window; the line passes through
    # (t_mean, operating level), which anchors the direction test
    t_mean_ms: float = 0.0

    def value_at(self, ts_ms: float) -> float:
        return self.intercept + self.slope_per_day * (ts_ms / MS_PER_DAY)

    @property
    def operating_level(self) -> float:
        return self.value_at(self.t_mean_ms)


class Forecaster(Protocol):
    def fit(self, window: Sequence[tuple[int, float]]) -> TrendFit: ...


def fit_trend(window: Sequence[tuple[int, float]]) -> TrendFit:
    """Least-squares line through (ts_ms, value) samples, slope per day."""
    if len(window) < 2:
        raise DegenerateWindow(f"need at least 2 samples, got {len(window)}")
    days = [ts / MS_PER_DAY for ts, _ in window]
    values = [v for _, v in window]
    t_mean = sum(days) / len(days)
    y_mean = sum(values) / len(values)
    sxx = sum((t - t_mean) ** 2 for t in days)
    if sxx == 0.0:
        raise DegenerateWindow("all timestamps equal")
    sxy = sum((t - t_mean) * (y - y_mean) for t, y in zip(days, values))
    slope = sxy / sxx
    return TrendFit(slope, y_mean - slope * t_mean, t_mean * MS_PER_DAY)


class OlsForecaster:
    def fit(self, window: Sequence[tuple[int, float]]) -> TrendFit:
        return fit_trend(window)


def days_to_saturation(fit: TrendFit, now_ms: int, capacity_bound: float,
                       epsilon: float = 1e-9) -> float:
    """Days from ``now`` until the fitted line reaches the capacity bound.

    Direction is judged at the trend's operating level: a slope carrying
    that level toward the bound saturates in (bound - y(now)) / slope days,
    clamped at zero when the crossing already happened. A flat trend
    (|slope| <= epsilon) or one moving away from the bound never saturates.
    """
    if abs(fit.slope_per_day) <= epsilon:
        return math.inf
    toward = capacity_bound - fit.operating_level
    if toward != 0.0 and (toward > 0.0) != (fit.slope_per_day > 0.0):
        return math.inf
    return max(0.0, (capacity_bound - fit.value_at(now_ms)) / fit.slope_per_day)


@dataclass(frozen=True)
class SaturationForecast:
    """A fitted window plus its saturation estimate, for reporting."""

    window: tuple[tuple[int, float], ...]
    capacity_bound: float
    fit: TrendFit
    days_to_saturation: float

    @classmethod
    def compute(cls, window: Sequence[tuple[int, float]], now_ms: int,
                capacity_bound: float, epsilon: float = 1e-9) -> "SaturationForecast":
        fit = fit_trend(window)
        days = days_to_saturation(fit, now_ms, capacity_bound, epsilon)
        return cls(tuple(window), capacity_bound, fit, days)
