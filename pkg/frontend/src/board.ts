/**
 * Triage board: tickets in lanes keyed by status, moved by drag.
 *
 * Lane moves are optimistic: the ticket jumps immediately, the transition
 * request follows, and a rejection (illegal edge, stale revision) snaps the
 * board back to the server's truth. Lane order always mirrors the server's
 * severity ranking; the board itself never re-sorts beyond that.
 */

import type { GatewayClient } from "./api.js";
import { ApiError } from "./api.js";
import type { TicketDoc, TicketStatus } from "./types.js";

export const LANES: TicketStatus[] = ["new", "triaged", "in_progress", "resolved", "closed"];

const SEVERITY_RANK: Record<string, number> = { critical: 3, major: 2, minor: 1, info: 0 };

export interface BoardState {
  team: string;
  lanes: Record<TicketStatus, TicketDoc[]>;
}

export type MoveOutcome =
  | { ok: true; state: BoardState }
  | { ok: false; state: BoardState; reason: string; conflict: boolean };

function emptyLanes(): Record<TicketStatus, TicketDoc[]> {
  return { new: [], triaged: [], in_progress: [], resolved: [], closed: [] };
}

/** Server-side ranking order: severity desc, then age, then id. */
function rankOrder(a: TicketDoc, b: TicketDoc): number {
  const severity = (SEVERITY_RANK[b.severity] ?? 0) - (SEVERITY_RANK[a.severity] ?? 0);
  if (severity !== 0) return severity;
  if (a.created_at !== b.created_at) return a.created_at - b.created_at;
  return a.ticket_id < b.ticket_id ? -1 : 1;
}

export function buildBoard(team: string, tickets: TicketDoc[]): BoardState {
  const lanes = emptyLanes();
  for (const ticket of [...tickets].sort(rankOrder)) {
    lanes[ticket.status].push(ticket);
  }
  return { team, lanes };
}

/** Fetch the team's tickets and rebuild the board from server data alone. */
export async function loadBoard(client: GatewayClient, team: string): Promise<BoardState> {
  const { tickets } = await client.listTickets();
  return buildBoard(team, tickets.filter((t) => t.team === team));
}

function applyLocalMove(state: BoardState, ticketId: string,
  to: TicketStatus): BoardState {
  const lanes = emptyLanes();
  let moved: TicketDoc | undefined;
  for (const lane of LANES) {
    for (const ticket of state.lanes[lane]) {
      if (ticket.ticket_id === ticketId) {
        moved = { ...ticket, status: to };
      } else {
        lanes[lane].push(ticket);
      }
    }
  }
  if (moved) {
    lanes[to].push(moved);
    lanes[to].sort(rankOrder);
  }
  return { team: state.team, lanes };
}

/**
 * Optimistic lane move. On rejection the board reloads from the server and
 * reports why; a 409 with a revision message flags a conflict so the UI can
 * re-prompt after the reload.
 */
export async function moveTicket(
  client: GatewayClient,
  state: BoardState,
  ticketId: string,
  to: TicketStatus,
  actor: string,
  render: (s: BoardState) => void,
): Promise<MoveOutcome> {
  const current = LANES.find((lane) =>
    state.lanes[lane].some((t) => t.ticket_id === ticketId));
  if (current === to || current === undefined) {
    return { ok: true, state };
  }
  const ticket = state.lanes[current].find((t) => t.ticket_id === ticketId)!;
  const optimistic = applyLocalMove(state, ticketId, to);
  render(optimistic);
  try {
    await client.transitionTicket(ticketId, to, actor, ticket.revision);
  } catch (err) {
    const reverted = await loadBoard(client, state.team);
    render(reverted);
    if (err instanceof ApiError) {
      const conflict = err.status === 409 && /revision/.test(err.message);
      return { ok: false, state: reverted, reason: err.message, conflict };
    }
    throw err;
  }
  const confirmed = await loadBoard(client, state.team);
  render(confirmed);
  return { ok: true, state: confirmed };
}

/** Append a comment; the returned board carries the server's timestamps. */
export async function addComment(
  client: GatewayClient,
  state: BoardState,
  ticketId: string,
  author: string,
  text: string,
): Promise<BoardState> {
  await client.commentTicket(ticketId, author, text);
  return loadBoard(client, state.team);
}
