import { describe, expect, it } from "vitest";

import type { ServerMessage, TelemetryPayload } from "../src/protocol.js";
import { Action, initialState, reduce, ViewState } from "../src/reducer.js";

function telemetry(seq: number, focus: [number, number, number]): ServerMessage {
  return {
    v: 1,
    seq,
    kind: "telemetry",
    payload: { focus, temperature_c: 20, trajectory_active: false } as unknown as Record<string, unknown>,
    ts: seq,
  };
}

function apply(state: ViewState, ...actions: Action[]): ViewState {
  return actions.reduce(reduce, state);
}

describe("reducer", () => {
  it("renders telemetry in order and counts rendered events", () => {
    const state = apply(
      initialState,
      { type: "connected" },
      { type: "server-message", message: telemetry(1, [0, 0, 100]) },
      { type: "server-message", message: telemetry(2, [1, 0, 100]) },
    );
    expect(state.eventsRendered).toBe(2);
    expect(state.telemetry?.focus).toEqual([1, 0, 100]);
    expect(state.seqViolations).toBe(0);
  });

  it("never renders an out-of-order event", () => {
    const state = apply(
      initialState,
      { type: "server-message", message: telemetry(5, [0, 0, 100]) },
      { type: "server-message", message: telemetry(4, [9, 9, 9]) },
      { type: "server-message", message: telemetry(5, [8, 8, 8]) },
    );
    expect(state.telemetry?.focus).toEqual([0, 0, 100]);
    expect(state.eventsRendered).toBe(1);
    expect(state.seqViolations).toBe(2);
  });

  it("surfaces gap markers instead of skipping silently", () => {
    const state = apply(
      initialState,
      { type: "server-message", message: telemetry(1, [0, 0, 100]) },
      {
        type: "server-message",
        message: { v: 1, seq: 2, kind: "gap", payload: { dropped: 3 }, ts: 2 },
      },
    );
    expect(state.gapCount).toBe(3);
    expect(state.notices.some((n) => n.includes("gap"))).toBe(true);
  });

  it("tracks pending commands until the ack", () => {
    const pending = { seq: 7, verb: "MoveFocus", target: [5, 0, 90] as [number, number, number] };
    let state = apply(initialState, { type: "command-sent", pending });
    expect(state.pending?.seq).toBe(7);
    state = apply(state, {
      type: "server-message",
      message: { v: 1, seq: 7, kind: "response", payload: {}, ts: 1 },
    });
    expect(state.pending).toBeNull();
    expect(state.acknowledgedFocus).toEqual([5, 0, 90]);
  });

  it("reverts the pending marker on an error response", () => {
    const pending = { seq: 3, verb: "MoveFocus", target: [0, 0, -10] as [number, number, number] };
    let state = apply(initialState, { type: "command-sent", pending });
    state = apply(state, {
      type: "server-message",
      message: { v: 1, seq: 3, kind: "error", payload: { message: "outside volume" }, ts: 1 },
    });
    expect(state.pending).toBeNull();
    expect(state.acknowledgedFocus).toBeNull();
    expect(state.notices[0]).toContain("outside volume");
  });

  it("only ever renders values received in events", () => {
    const payload: TelemetryPayload = {
      focus: [12, -3, 110],
      temperature_c: 21.5,
      trajectory_active: true,
      particle: { position: [12, -3, 97.6], velocity: [0, 0, 0] },
    };
    const state = apply(initialState, {
      type: "server-message",
      message: { v: 1, seq: 1, kind: "telemetry", payload: payload as unknown as Record<string, unknown>, ts: 1 },
    });
    // the rendered snapshot is the event payload itself, verbatim
    expect(state.telemetry).toBe(payload);
  });

  it("drops pending on disconnect", () => {
    const state = apply(
      initialState,
      { type: "connected" },
      { type: "command-sent", pending: { seq: 1, verb: "MoveFocus" } },
      { type: "disconnected" },
    );
    expect(state.connection).toBe("disconnected");
    expect(state.pending).toBeNull();
  });
});
