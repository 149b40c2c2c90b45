/**
 * Metric explorer model: run a query, shape the result for rendering.
 *
 * The chart mirrors the gateway's rows exactly, one point per row, no
 * client-side resampling or gap filling. Parse failures surface the
 * 1-based column so the editor can point at the offending spot.
 */

import type { GatewayClient } from "./api.js";
import { ApiError } from "./api.js";
import type { QueryResult } from "./types.js";

export interface ChartSeries {
  /** group-by tag values joined for the legend; "(all)" when ungrouped */
  label: string;
  points: { t: number; v: number }[];
}

export interface ChartModel {
  kind: "chart";
  series: ChartSeries[];
  pointCount: number;
}

export interface EmptyModel {
  kind: "empty";
}

export interface ParseErrorModel {
  kind: "parse-error";
  message: string;
  column: number;
}

export type ExplorerModel = ChartModel | EmptyModel | ParseErrorModel;

/** Shape a query result into chart series; exact row fidelity. */
export function toChartModel(result: QueryResult): ChartModel | EmptyModel {
  if (result.rows.length === 0) return { kind: "empty" };
  const groupWidth = result.columns.length - 2; // trailing columns: time, value
  const byLabel = new Map<string, ChartSeries>();
  for (const row of result.rows) {
    const label = groupWidth > 0
      ? row.slice(0, groupWidth).map(String).join(",")
      : "(all)";
    let series = byLabel.get(label);
    if (!series) {
      series = { label, points: [] };
      byLabel.set(label, series);
    }
    series.points.push({
      t: Number(row[groupWidth]),
      v: Number(row[groupWidth + 1]),
    });
  }
  for (const series of byLabel.values()) {
    series.points.sort((a, b) => a.t - b.t);
  }
  return {
    kind: "chart",
    series: [...byLabel.values()],
    pointCount: result.rows.length,
  };
}

/** Run a query; banner-class failures (401/502) re-throw for the shell. */
export async function runExplorerQuery(
  client: GatewayClient,
  sql: string,
): Promise<ExplorerModel> {
  try {
    return toChartModel(await client.query(sql));
  } catch (err) {
    if (err instanceof ApiError && err.status === 400 && err.column !== undefined) {
      return { kind: "parse-error", message: err.message, column: err.column };
    }
    throw err;
  }
}

/** Render one series as an SVG polyline path, mapped into a w x h viewbox. */
export function toSvgPath(series: ChartSeries, w: number, h: number,
  bounds?: { t0: number; t1: number; v0: number; v1: number }): string {
  if (series.points.length === 0) return "";
  const ts = series.points.map((p) => p.t);
  const vs = series.points.map((p) => p.v);
  const t0 = bounds?.t0 ?? Math.min(...ts);
  const t1 = bounds?.t1 ?? Math.max(...ts);
  const v0 = bounds?.v0 ?? Math.min(...vs);
  const v1 = bounds?.v1 ?? Math.max(...vs);
  const spanT = t1 - t0 || 1;
  const spanV = v1 - v0 || 1;
  return series.points
    .map((p, i) => {
      const x = ((p.t - t0) / spanT) * w;
      const y = h - ((p.v - v0) / spanV) * h;
      return `${i === 0 ? "M" : "L"}${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}
