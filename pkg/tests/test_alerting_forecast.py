"""Trend fitting and saturation forecasting against a closed-form OLS oracle."""

import math
import random

import pytest

from miniops.alerting.forecast import (
    MS_PER_DAY,
    DegenerateWindow,
    TrendFit,
    days_to_saturation,
    fit_trend,
)

from oracle import ols_fit

DAY = int(MS_PER_DAY)


def window(*pairs):
    return [(int(day * MS_PER_DAY), float(v)) for day, v in pairs]


def test_exact_line():
    fit = fit_trend(window((0, 100), (1, 98), (2, 96)))
    assert fit.slope_per_day == pytest.approx(-2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(100.0, abs=1e-9)


def test_constant_series_slope_zero():
    fit = fit_trend(window((0, 5), (1, 5), (2, 5)))
    assert fit.slope_per_day == 0.0


def test_degenerate_windows():
    with pytest.raises(DegenerateWindow):
        fit_trend([(1000, 1.0)])
    with pytest.raises(DegenerateWindow):
        fit_trend([(1000, 1.0), (1000, 2.0)])


def test_noisy_line_matches_ols_oracle():
    rng = random.Random(13)
    samples = []
    for i in range(200):
        t_ms = i * 3_600_000
        y = 50.0 - 1.5 * (t_ms / MS_PER_DAY) + rng.uniform(-0.5, 0.5)
        samples.append((t_ms, y))
    fit = fit_trend(samples)
    slope_oracle, intercept_oracle = ols_fit([(ts / MS_PER_DAY, y) for ts, y in samples])
    assert fit.slope_per_day == pytest.approx(slope_oracle, rel=1e-12)
    assert fit.intercept == pytest.approx(intercept_oracle, rel=1e-12)


def test_days_to_saturation_exact_division():
    # free space 100 at now, draining 2 per day, bound 0
    fit = TrendFit(slope_per_day=-2.0, intercept=100.0)
    assert days_to_saturation(fit, now_ms=0, capacity_bound=0.0) == pytest.approx(50.0, rel=1e-9)


def test_days_to_saturation_diverging_is_infinite():
    fit = TrendFit(slope_per_day=2.0, intercept=100.0)
    assert math.isinf(days_to_saturation(fit, now_ms=0, capacity_bound=0.0))


def test_days_to_saturation_flat_is_infinite():
    fit = TrendFit(slope_per_day=0.0, intercept=50.0)
    assert math.isinf(days_to_saturation(fit, now_ms=0, capacity_bound=0.0))
    nearly_flat = TrendFit(slope_per_day=1e-12, intercept=50.0)
    assert math.isinf(days_to_saturation(nearly_flat, now_ms=0, capacity_bound=100.0))


def test_days_to_saturation_already_past_clamps_to_zero():
    # drained below the bound already
    fit = TrendFit(slope_per_day=-2.0, intercept=0.0)
    assert days_to_saturation(fit, now_ms=DAY, capacity_bound=0.0) == 0.0


def test_days_measured_from_now():
    fit = TrendFit(slope_per_day=-2.0, intercept=100.0)
    # 10 days in, 80 remain, at 2/day: 40 days left
    assert days_to_saturation(fit, now_ms=10 * DAY, capacity_bound=0.0) == pytest.approx(40.0)


def test_growing_toward_upper_bound():
    fit = TrendFit(slope_per_day=5.0, intercept=20.0)
    assert days_to_saturation(fit, now_ms=0, capacity_bound=100.0) == pytest.approx(16.0)


def test_scale_invariance_property():
    rng = random.Random(99)
    for _ in range(100):
        n = rng.randint(3, 30)
        samples = [(i * rng.randint(1, 48) * 3_600_000 + rng.randint(0, 1000),
                    rng.uniform(-100, 100)) for i in range(n)]
        samples.sort()
        bound = rng.uniform(-200, 200)
        k = rng.uniform(0.01, 100)
        now = samples[-1][0]
        try:
            base = days_to_saturation(fit_trend(samples), now, bound)
            scaled = days_to_saturation(
                fit_trend([(ts, v * k) for ts, v in samples]), now, bound * k)
        except DegenerateWindow:
            continue
        if math.isinf(base):
            assert math.isinf(scaled)
        else:
            assert scaled == pytest.approx(base, rel=1e-6, abs=1e-9)


def test_time_shift_invariance_property():
    rng = random.Random(77)
    for _ in range(100):
        n = rng.randint(3, 30)
        samples = [(i * 6 * 3_600_000 + rng.randint(0, 500), rng.uniform(0, 50))
                   for i in range(n)]
        shift = rng.randint(-10 * DAY, 10 * DAY)
        fit = fit_trend(samples)
        shifted = fit_trend([(ts + shift, v) for ts, v in samples])
        assert shifted.slope_per_day == pytest.approx(fit.slope_per_day, rel=1e-9, abs=1e-15)
