/**
 * API-contract suite: every mutation the console can perform is captured
 * and must match a documented gateway route, with the bearer token on it.
 */

import { describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { addComment, loadBoard, moveTicket } from "../src/board.js";
import { savePanelValidated } from "../src/panels.js";
import { saveRule } from "../src/rules.js";
import { FakeGateway } from "./fake_gateway.js";

// the documented mutating surface the console is allowed to touch
const DOCUMENTED_MUTATIONS: [string, RegExp][] = [
  ["POST", /^\/api\/query$/],
  ["POST", /^\/api\/parse$/],
  ["POST", /^\/api\/panels$/],
  ["DELETE", /^\/api\/panels\/[^/]+$/],
  ["POST", /^\/api\/rules$/],
  ["DELETE", /^\/api\/rules\/[^/]+$/],
  ["POST", /^\/api\/tickets\/[^/]+\/transition$/],
  ["POST", /^\/api\/tickets\/[^/]+\/comments$/],
];

function isDocumented(method: string, path: string): boolean {
  if (method === "GET") return true; // reads are unrestricted
  return DOCUMENTED_MUTATIONS.some(([m, re]) => m === method && re.test(path));
}

describe("console API contract", () => {
  it("every console mutation maps to a documented gateway call", async () => {
    const gateway = new FakeGateway();
    gateway.addTicket({ ticket_id: "T-1", status: "triaged", revision: 1 });
    const client = new GatewayClient("", "tok", gateway.fetch);

    // exercise the full mutating surface of every console feature
    await savePanelValidated(client, {
      query: 'SELECT avg(value) FROM "m" WHERE ts >= 0 AND ts < 1',
      refresh_s: 30, kind: "timeseries",
    });
    await client.deletePanel("p1");
    await saveRule(client, {
      rule_id: "r1", source: 'SELECT last(value) FROM "m" WHERE ts >= 0 AND ts < 1',
      comparator: ">", threshold: 90, severity: "major",
    });
    await client.deleteRule("r1");
    const board = await loadBoard(client, "operations");
    await moveTicket(client, board, "T-1", "in_progress", "tester", () => {});
    await addComment(client, board, "T-1", "tester", "note");

    const mutations = client.captured.filter((c) => c.method !== "GET");
    expect(mutations.length).toBeGreaterThanOrEqual(7);
    for (const call of client.captured) {
      expect(isDocumented(call.method, call.path),
        `${call.method} ${call.path} is not a documented gateway call`).toBe(true);
    }
  });

  it("mutations carry the bearer token; reads do not require it", async () => {
    const seen: { auth: string | undefined; method: string }[] = [];
    const gateway = new FakeGateway();
    const recordingFetch: typeof gateway.fetch = async (input, init) => {
      const headers = (init?.headers ?? {}) as Record<string, string>;
      seen.push({ auth: headers["Authorization"], method: init?.method ?? "GET" });
      return gateway.fetch(input, init);
    };
    const client = new GatewayClient("", "secret", recordingFetch);
    await client.listTickets();
    await client.saveRule({
      rule_id: "r", source: 'SELECT last(value) FROM "m" WHERE ts >= 0 AND ts < 1',
      comparator: ">", threshold: 1, severity: "info",
    });
    expect(seen[0]?.auth).toBeUndefined();
    expect(seen[1]?.auth).toBe("Bearer secret");
  });

  it("502 surfaces the upstream name for the banner", async () => {
    const gateway = new FakeGateway();
    gateway.down = true;
    const client = new GatewayClient("", "", gateway.fetch);
    await expect(client.listTickets()).rejects.toMatchObject({
      status: 502,
      upstream: "incidents",
      isBanner: true,
    });
  });
});
