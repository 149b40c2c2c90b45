/**
 * Browser shell: tabs for the metric explorer, alert rules, triage board,
 * and health. All state lives on the server; this file is DOM wiring over
 * the models in explorer.ts / rules.ts / board.ts / panels.ts.
 */

import { ApiError, GatewayClient } from "./api.js";
import { LANES, addComment, loadBoard, moveTicket, type BoardState } from "./board.js";
import { runExplorerQuery, toSvgPath, type ChartModel } from "./explorer.js";
import { loadPanels, savePanelValidated } from "./panels.js";
import { saveRule } from "./rules.js";
import type { AlertRuleDoc, TicketStatus } from "./types.js";

const client = new GatewayClient("", localStorage.getItem("miniops-token") ?? "");

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, attrs: Record<string, string> = {}, ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  node.append(...children);
  return node;
}

function banner(message: string, retry: () => void): void {
  const zone = document.getElementById("banner")!;
  zone.replaceChildren(
    el("div", { class: "banner" },
      el("span", {}, message),
      el("button", { class: "retry" }, "retry")),
  );
  zone.querySelector("button")!.addEventListener("click", () => {
    zone.replaceChildren();
    retry();
  });
}

async function guarded(action: () => Promise<void>): Promise<void> {
  try {
    await action();
  } catch (err) {
    if (err instanceof ApiError && err.isBanner) {
      banner(err.upstream ? `${err.message}` : `gateway: ${err.message}`,
        () => void guarded(action));
      return;
    }
    throw err;
  }
}

// -- explorer ----------------------------------------------------------------

function renderChart(zone: HTMLElement, model: ChartModel): void {
  const w = 720;
  const h = 240;
  const all = model.series.flatMap((s) => s.points);
  const bounds = {
    t0: Math.min(...all.map((p) => p.t)),
    t1: Math.max(...all.map((p) => p.t)),
    v0: Math.min(...all.map((p) => p.v)),
    v1: Math.max(...all.map((p) => p.v)),
  };
  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("viewBox", `0 0 ${w} ${h}`);
  svg.setAttribute("class", "chart");
  model.series.forEach((series, i) => {
    const path = document.createElementNS(svgNs, "path");
    path.setAttribute("d", toSvgPath(series, w, h, bounds));
    path.setAttribute("class", `line line-${i % 8}`);
    svg.append(path);
  });
  const legend = el("div", { class: "legend" },
    ...model.series.map((s, i) => el("span", { class: `swatch-${i % 8}` }, s.label)));
  zone.replaceChildren(svg, legend,
    el("p", { class: "muted" }, `${model.pointCount} point(s)`));
}

function setupExplorer(): void {
  const input = document.getElementById("explorer-sql") as HTMLTextAreaElement;
  const zone = document.getElementById("explorer-result")!;
  const runAndRender = () => guarded(async () => {
    const model = await runExplorerQuery(client, input.value);
    if (model.kind === "empty") {
      zone.replaceChildren(el("p", { class: "muted" }, "no data"));
    } else if (model.kind === "parse-error") {
      zone.replaceChildren(
        el("p", { class: "error" }, `${model.message} (column ${model.column})`),
        el("pre", { class: "caret" }, `${input.value}\n${" ".repeat(model.column - 1)}^`));
    } else {
      renderChart(zone, model);
    }
  });
  document.getElementById("explorer-run")!.addEventListener("click", runAndRender);
  document.getElementById("explorer-save")!.addEventListener("click", () =>
    guarded(async () => {
      const result = await savePanelValidated(client, {
        query: input.value, refresh_s: 30, kind: "timeseries",
      });
      zone.replaceChildren(el("p", { class: result.ok ? "muted" : "error" },
        result.ok ? `saved panel ${result.panel.panel_id}`
          : `${result.message}${result.column ? ` (column ${result.column})` : ""}`));
    }));
  document.getElementById("explorer-panels")!.addEventListener("click", () =>
    guarded(async () => {
      const panels = await loadPanels(client);
      zone.replaceChildren(el("ul", {},
        ...panels.map((p) => el("li", {}, `${p.panel_id}: ${p.query}`))));
    }));
}

// -- alert rules --------------------------------------------------------------

function setupRules(): void {
  const zone = document.getElementById("rules-list")!;
  const form = document.getElementById("rule-form") as HTMLFormElement;
  const errorsZone = document.getElementById("rule-errors")!;

  const refresh = () => guarded(async () => {
    const { rules } = await client.listRules();
    const { alerts } = await client.listAlerts();
    const firing = new Set(
      alerts.filter((a) => a.state === "firing").map((a) => a.rule_id));
    zone.replaceChildren(el("table", {},
      el("tr", {}, ...["rule", "condition", "severity", "state"].map((h) => el("th", {}, h))),
      ...rules.map((r) => el("tr", { class: firing.has(r.rule_id) ? "firing" : "" },
        el("td", {}, r.rule_id),
        el("td", {}, `${r.comparator} ${r.threshold}`),
        el("td", {}, r.severity),
        el("td", {}, firing.has(r.rule_id) ? "FIRING" : (r.enabled === false ? "off" : "ok"))))));
  });

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const rule: AlertRuleDoc = {
      rule_id: String(data.get("rule_id") ?? ""),
      source: String(data.get("source") ?? ""),
      comparator: String(data.get("comparator")) as AlertRuleDoc["comparator"],
      threshold: Number(data.get("threshold")),
      severity: String(data.get("severity")) as AlertRuleDoc["severity"],
    };
    void guarded(async () => {
      const result = await saveRule(client, rule);
      if (result.ok) {
        errorsZone.replaceChildren();
        await refresh();
      } else {
        errorsZone.replaceChildren(...Object.entries(result.errors).map(
          ([field, message]) => el("p", { class: "error" }, `${field}: ${message}`)));
      }
    });
  });
  document.getElementById("rules-refresh")!.addEventListener("click", refresh);
  void refresh();
}

// -- triage board -----------------------------------------------------------------

let board: BoardState | null = null;

function renderBoard(state: BoardState): void {
  board = state;
  const zone = document.getElementById("board-lanes")!;
  zone.replaceChildren(...LANES.map((lane) => {
    const column = el("div", { class: "lane", "data-lane": lane },
      el("h3", {}, lane.replace("_", " ")),
      ...state.lanes[lane].map((ticket) => {
        const card = el("div", {
          class: `card severity-${ticket.severity}`,
          draggable: "true",
          "data-ticket": ticket.ticket_id,
        },
        el("strong", {}, `${ticket.ticket_id} ${ticket.title}`),
        el("span", { class: "muted" }, ` ${ticket.severity} · ${ticket.team}`));
        card.addEventListener("dragstart", (event) => {
          event.dataTransfer?.setData("text/plain", ticket.ticket_id);
        });
        card.addEventListener("click", () => {
          const text = prompt(`comment on ${ticket.ticket_id}:`);
          if (text && board) {
            void guarded(async () => {
              renderBoard(await addComment(client, board!, ticket.ticket_id, "console", text));
            });
          }
        });
        return card;
      }));
    column.addEventListener("dragover", (event) => event.preventDefault());
    column.addEventListener("drop", (event) => {
      event.preventDefault();
      const ticketId = event.dataTransfer?.getData("text/plain");
      if (!ticketId || !board) return;
      void guarded(async () => {
        const outcome = await moveTicket(client, board!, ticketId,
          lane as TicketStatus, "console", renderBoard);
        const note = document.getElementById("board-note")!;
        note.textContent = outcome.ok ? "" : (outcome.conflict
          ? `conflict: ${outcome.reason}; board reloaded, try again`
          : `rejected: ${outcome.reason}`);
      });
    });
    return column;
  }));
}

function setupBoard(): void {
  const teamInput = document.getElementById("board-team") as HTMLInputElement;
  const load = () => guarded(async () => {
    renderBoard(await loadBoard(client, teamInput.value));
  });
  document.getElementById("board-load")!.addEventListener("click", load);
}

// -- health ------------------------------------------------------------------------

function setupHealth(): void {
  const zone = document.getElementById("health-zone")!;
  const refresh = () => guarded(async () => {
    const health = await client.health();
    zone.replaceChildren(
      el("ul", {}, ...Object.entries(health.subsystems).map(([name, state]) =>
        el("li", { class: state }, `${name}: ${state}`))),
      el("p", { class: "muted" },
        `partitions: ${health.store_partitions ?? "?"}`));
  });
  document.getElementById("health-refresh")!.addEventListener("click", refresh);
  void refresh();
}

// -- shell ---------------------------------------------------------------------------

function setupTabs(): void {
  const tabs = document.querySelectorAll<HTMLElement>("[data-tab]");
  tabs.forEach((tab) => tab.addEventListener("click", () => {
    document.querySelectorAll<HTMLElement>(".pane").forEach((pane) => {
      pane.hidden = pane.id !== `pane-${tab.dataset.tab}`;
    });
    tabs.forEach((other) => other.classList.toggle("active", other === tab));
  }));
}

function setupToken(): void {
  const input = document.getElementById("token") as HTMLInputElement;
  input.value = localStorage.getItem("miniops-token") ?? "";
  input.addEventListener("change", () => {
    localStorage.setItem("miniops-token", input.value);
    client.setToken(input.value);
  });
}

setupTabs();
setupToken();
setupExplorer();
setupRules();
setupBoard();
setupHealth();
