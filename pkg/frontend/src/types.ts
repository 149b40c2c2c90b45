/**
 * Wire types for the gateway API.
 *
 * These mirror the server's JSON exactly; the console holds no state of
 * its own beyond what these documents carry.
 */

export interface QueryResult {
  columns: string[];
  /** one row per (group tags..., bucket start ms, aggregate value) */
  rows: (string | number)[][];
}

export interface ParseOk {
  ok: true;
  canonical: string;
}

export interface ApiErrorBody {
  error: string;
  column?: number;
  upstream?: string;
}

export interface PanelDoc {
  panel_id: string;
  query: string;
  refresh_s: number;
  kind: "timeseries" | "single-stat" | "table";
}

export interface AlertRuleDoc {
  rule_id: string;
  source: string;
  comparator: ">" | ">=" | "<" | "<=";
  threshold: number;
  severity: "info" | "minor" | "major" | "critical";
  for_duration_s?: number;
  eval_every_s?: number;
  enabled?: boolean;
  lookback_s?: number | null;
  forecast_bound?: number | null;
  actions?: { type: string; team_hint?: string }[];
}

export interface AlertInstanceDoc {
  rule_id: string;
  group: string[];
  state: "pending" | "firing" | "resolved";
  first_breach_at: number;
  fired_at: number | null;
  resolved_at: number | null;
  last_value: number | null;
}

export type TicketStatus = "new" | "triaged" | "in_progress" | "resolved" | "closed";

export interface CommentDoc {
  ts: number;
  author: string;
  text: string;
}

export interface TicketDoc {
  ticket_id: string;
  title: string;
  description: string;
  attributes: Record<string, string>;
  severity: string;
  status: TicketStatus;
  team: string;
  assignee: string | null;
  comments: CommentDoc[];
  created_at: number;
  revision: number;
}

export interface HealthDoc {
  ok: boolean;
  subsystems: Record<string, "up" | "down">;
  queue_lag?: Record<string, Record<string, number>>;
  store_partitions?: number;
}
