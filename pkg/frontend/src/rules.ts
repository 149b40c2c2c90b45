/**
 * Alert rule editor model: client-side form checks, server round-trip,
 * list refresh from server state (never from the submitted form).
 */

import type { GatewayClient } from "./api.js";
import { ApiError } from "./api.js";
import type { AlertRuleDoc } from "./types.js";

const COMPARATORS = new Set([">", ">=", "<", "<="]);
const SEVERITIES = new Set(["info", "minor", "major", "critical"]);

export interface FieldErrors {
  [field: string]: string;
}

/** Cheap client-side checks; the server remains the authority. */
export function validateRuleForm(rule: AlertRuleDoc): FieldErrors {
  const errors: FieldErrors = {};
  if (!rule.rule_id.trim()) errors.rule_id = "rule id is required";
  if (!rule.source.trim()) errors.source = "source query is required";
  if (!COMPARATORS.has(rule.comparator)) errors.comparator = "unknown comparator";
  if (!Number.isFinite(rule.threshold)) errors.threshold = "threshold must be a number";
  if (!SEVERITIES.has(rule.severity)) errors.severity = "unknown severity";
  return errors;
}

export type RuleSaveResult =
  | { ok: true; rules: AlertRuleDoc[] }
  | { ok: false; errors: FieldErrors };

/**
 * Save a rule and return the refreshed server-side list.
 * Server rejections map onto the source field (parse errors carry a column).
 */
export async function saveRule(
  client: GatewayClient,
  rule: AlertRuleDoc,
): Promise<RuleSaveResult> {
  const errors = validateRuleForm(rule);
  if (Object.keys(errors).length > 0) return { ok: false, errors };
  try {
    await client.saveRule(rule);
  } catch (err) {
    if (err instanceof ApiError && err.status === 400) {
      const where = err.column !== undefined ? ` (column ${err.column})` : "";
      return { ok: false, errors: { source: `${err.message}${where}` } };
    }
    throw err;
  }
  const { rules } = await client.listRules();
  return { ok: true, rules };
}
