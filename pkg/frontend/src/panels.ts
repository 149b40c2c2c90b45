/**
 * Dashboard panels: persisted server-side, validated before save.
 *
 * A panel's query must pass the gateway parse endpoint before the save
 * request goes out; a saved panel reloaded later issues the identical
 * query text (the console stores nothing locally).
 */

import type { GatewayClient } from "./api.js";
import { ApiError } from "./api.js";
import type { PanelDoc } from "./types.js";

export interface PanelForm {
  panel_id?: string;
  query: string;
  refresh_s: number;
  kind: PanelDoc["kind"];
}

export type PanelSaveResult =
  | { ok: true; panel: PanelDoc }
  | { ok: false; message: string; column?: number };

export async function savePanelValidated(
  client: GatewayClient,
  form: PanelForm,
): Promise<PanelSaveResult> {
  try {
    await client.parse(form.query); // validate first; invalid queries never save
  } catch (err) {
    if (err instanceof ApiError && err.status === 400) {
      return { ok: false, message: err.message, column: err.column };
    }
    throw err;
  }
  const panel = await client.savePanel(form);
  return { ok: true, panel };
}

export async function loadPanels(client: GatewayClient): Promise<PanelDoc[]> {
  return (await client.listPanels()).panels;
}
