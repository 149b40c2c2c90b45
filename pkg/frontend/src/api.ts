/**
 * Gateway client: every console mutation goes through here, so the
 * contract suite can assert the exact calls against the documented routes.
 *
 * Errors carry the HTTP status and the server's error body; 401 and 502
 * surface to the shell as a banner with retry, parse errors keep their
 * 1-based column for inline display.
 */

import type {
  AlertInstanceDoc,
  AlertRuleDoc,
  ApiErrorBody,
  HealthDoc,
  PanelDoc,
  ParseOk,
  QueryResult,
  TicketDoc,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly column?: number,
    readonly upstream?: string,
  ) {
    super(message);
  }

  /** 401/502 are infrastructure problems the shell shows as a banner. */
  get isBanner(): boolean {
    return this.status === 401 || this.status === 502;
  }
}

export interface CapturedCall {
  method: string;
  path: string;
  body?: unknown;
}

export class GatewayClient {
  /** every request made, for the API-contract test suite */
  readonly captured: CapturedCall[] = [];

  constructor(
    private readonly baseUrl: string = "",
    private token: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    this.captured.push({ method, path, body });
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token && method !== "GET") headers["Authorization"] = `Bearer ${this.token}`;
    let res: Response;
    try {
      res = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, `gateway unreachable: ${String(err)}`);
    }
    if (!res.ok) {
      let parsed: ApiErrorBody | undefined;
      try {
        parsed = (await res.json()) as ApiErrorBody;
      } catch {
        parsed = undefined;
      }
      throw new ApiError(res.status, parsed?.error ?? `HTTP ${res.status}`,
        parsed?.column, parsed?.upstream);
    }
    return (await res.json()) as T;
  }

  // -- store ----------------------------------------------------------------

  query(sql: string): Promise<QueryResult> {
    return this.request<QueryResult>("POST", "/api/query", { sql });
  }

  parse(sql: string): Promise<ParseOk> {
    return this.request<ParseOk>("POST", "/api/parse", { sql });
  }

  // -- panels ------------------------------------------------------------------

  listPanels(): Promise<{ panels: PanelDoc[] }> {
    return this.request("GET", "/api/panels");
  }

  savePanel(panel: Omit<PanelDoc, "panel_id"> & { panel_id?: string }): Promise<PanelDoc> {
    return this.request("POST", "/api/panels", panel);
  }

  deletePanel(panelId: string): Promise<{ deleted: boolean }> {
    return this.request("DELETE", `/api/panels/${panelId}`);
  }

  // -- alert rules -----------------------------------------------------------------

  listRules(): Promise<{ rules: AlertRuleDoc[] }> {
    return this.request("GET", "/api/rules");
  }

  saveRule(rule: AlertRuleDoc): Promise<AlertRuleDoc> {
    return this.request("POST", "/api/rules", rule);
  }

  deleteRule(ruleId: string): Promise<{ deleted: boolean }> {
    return this.request("DELETE", `/api/rules/${ruleId}`);
  }

  listAlerts(state?: string): Promise<{ alerts: AlertInstanceDoc[] }> {
    const suffix = state ? `?state=${encodeURIComponent(state)}` : "";
    return this.request("GET", `/api/alerts${suffix}`);
  }

  // -- tickets --------------------------------------------------------------------------

  teamQueue(team: string): Promise<{ tickets: TicketDoc[] }> {
    return this.request("GET", `/api/teams/${encodeURIComponent(team)}/queue`);
  }

  listTickets(): Promise<{ tickets: TicketDoc[] }> {
    return this.request("GET", "/api/tickets");
  }

  getTicket(ticketId: string): Promise<TicketDoc> {
    return this.request("GET", `/api/tickets/${ticketId}`);
  }

  transitionTicket(ticketId: string, status: string, actor: string,
    expectedRevision?: number): Promise<TicketDoc> {
    return this.request("POST", `/api/tickets/${ticketId}/transition`, {
      status,
      actor,
      ...(expectedRevision === undefined ? {} : { expected_revision: expectedRevision }),
    });
  }

  commentTicket(ticketId: string, author: string, text: string): Promise<TicketDoc> {
    return this.request("POST", `/api/tickets/${ticketId}/comments`, { author, text });
  }

  // -- health -------------------------------------------------------------------------------

  health(): Promise<HealthDoc> {
    return this.request("GET", "/api/health");
  }
}
