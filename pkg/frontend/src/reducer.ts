// Single state reducer for the console. All socket events and user input
// funnel through reduce(); the view renders ViewState and nothing else, so
// every value on screen traces back to a received message verbatim.

import type { ServerMessage, TelemetryPayload, Vec3 } from "./protocol.js";

export type ConnectionStatus = "disconnected" | "connecting" | "connected";

export interface PendingCommand {
  seq: number;
  verb: string;
  target?: Vec3;
}

export interface ViewState {
  connection: ConnectionStatus;
  telemetry: TelemetryPayload | null;
  telemetrySeq: number | null;
  seqViolations: number;
  gapCount: number;
  pending: PendingCommand | null;
  // focus of the last acknowledged command; telemetry carries the live one
  acknowledgedFocus: Vec3 | null;
  notices: string[];
  eventsRendered: number;
  plane: "xz" | "xy";
}

export const initialState: ViewState = {
  connection: "disconnected",
  telemetry: null,
  telemetrySeq: null,
  seqViolations: 0,
  gapCount: 0,
  pending: null,
  acknowledgedFocus: null,
  notices: [],
  eventsRendered: 0,
  plane: "xz",
};

export type Action =
  | { type: "connecting" }
  | { type: "connected" }
  | { type: "disconnected" }
  | { type: "command-sent"; pending: PendingCommand }
  | { type: "server-message"; message: ServerMessage }
  | { type: "select-plane"; plane: "xz" | "xy" }
  | { type: "dismiss-notices" };

const MAX_NOTICES = 8;

function withNotice(state: ViewState, text: string): ViewState {
  return { ...state, notices: [...state.notices.slice(-(MAX_NOTICES - 1)), text] };
}

export function reduce(state: ViewState, action: Action): ViewState {
  switch (action.type) {
    case "connecting":
      return { ...state, connection: "connecting" };
    case "connected":
      return { ...state, connection: "connected" };
    case "disconnected":
      return { ...state, connection: "disconnected", pending: null };
    case "select-plane":
      return { ...state, plane: action.plane };
    case "dismiss-notices":
      return { ...state, notices: [] };
    case "command-sent":
      return { ...state, pending: action.pending };
    case "server-message":
      return onServerMessage(state, action.message);
  }
}

function onServerMessage(state: ViewState, message: ServerMessage): ViewState {
  switch (message.kind) {
    case "response": {
      if (state.pending && message.seq === state.pending.seq) {
        const acknowledged =
          state.pending.verb === "MoveFocus" && state.pending.target
            ? state.pending.target
            : state.acknowledgedFocus;
        return { ...state, pending: null, acknowledgedFocus: acknowledged };
      }
      return state;
    }
    case "error": {
      const text = String((message.payload as { message?: string }).message ?? "request failed");
      if (state.pending && message.seq === state.pending.seq) {
        // optimistic marker reverts: the command never took effect
        return withNotice({ ...state, pending: null }, text);
      }
      return withNotice(state, text);
    }
    case "gap": {
      const dropped = Number((message.payload as { dropped?: number }).dropped ?? 0);
      const next = acceptTelemetrySeq(state, message.seq);
      if (next === null) {
        return { ...state, seqViolations: state.seqViolations + 1 };
      }
      return withNotice(
        { ...next, gapCount: next.gapCount + Math.max(dropped, 1) },
        `telemetry gap: ${dropped} event(s) dropped`,
      );
    }
    case "telemetry": {
      const next = acceptTelemetrySeq(state, message.seq);
      if (next === null) {
        // out-of-order event: surfaced as a violation, never rendered
        return { ...state, seqViolations: state.seqViolations + 1 };
      }
      return {
        ...next,
        telemetry: message.payload as unknown as TelemetryPayload,
        eventsRendered: next.eventsRendered + 1,
      };
    }
  }
}

function acceptTelemetrySeq(state: ViewState, seq: number): ViewState | null {
  if (state.telemetrySeq !== null && seq <= state.telemetrySeq) {
    return null;
  }
  return { ...state, telemetrySeq: seq };
}
