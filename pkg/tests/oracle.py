"""Independent brute-force oracles used by the test suite.

These stay deliberately naive: linear scans and closed-form arithmetic,
sharing no code with the implementations they check.
"""

from __future__ import annotations

from miniops.records import MetricPoint
from miniops.tsstore.sql import Query


def brute_force_query(points: list[MetricPoint], q: Query):
    """Recompute a query by linear scan over raw points.

    Mirrors the documented semantics only: tag-equality conjunction,
    half-open range, from-aligned buckets, empty buckets omitted, LWW on
    duplicate (series, ts), `last` tie-broken by canonical series key.
    """
    # last-write-wins dedup, preserving final values per (series, ts)
    latest = {}
    for p in points:
        latest[(p.series, p.ts)] = p.value

    cells = {}
    for (series, ts), value in latest.items():
        if series.name != q.metric:
            continue
        if any(series.tag(k) != v for k, v in q.filters):
            continue
        if not (q.from_ms <= ts < q.to_ms):
            continue
        group = tuple(series.tag(g) or "" for g in q.group_by)
        if q.bucket_s is None:
            bucket = q.from_ms
        else:
            width = q.bucket_s * 1000
            bucket = q.from_ms + ((ts - q.from_ms) // width) * width
        cells.setdefault((group, bucket), []).append((ts, series.canonical, value))

    rows = []
    for (group, bucket), entries in cells.items():
        values = [v for _, _, v in entries]
        if q.agg == "avg":
            out = sum(values) / len(values)
        elif q.agg == "min":
            out = min(values)
        elif q.agg == "max":
            out = max(values)
        elif q.agg == "sum":
            out = sum(values)
        elif q.agg == "count":
            out = float(len(values))
        elif q.agg == "last":
            out = max(entries)[2]
        else:
            raise AssertionError(q.agg)
        rows.append((group, bucket, out))
    rows.sort(key=lambda row: (row[0], row[1]))
    return rows


def ols_fit(samples: list[tuple[float, float]]) -> tuple[float, float]:
    """Closed-form ordinary least squares: slope and intercept over (t, y)."""
    n = len(samples)
    t_mean = sum(t for t, _ in samples) / n
    y_mean = sum(y for _, y in samples) / n
    sxx = sum((t - t_mean) ** 2 for t, _ in samples)
    sxy = sum((t - t_mean) * (y - y_mean) for t, y in samples)
    slope = sxy / sxx
    return slope, y_mean - slope * t_mean
