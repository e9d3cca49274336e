// Console client: owns the command sequence counter, feeds every socket
// message through the reducer, and exposes the user-facing operations.

import { buildStartTrajectory, buildStop, TrajectoryForm } from "./controls.js";
import { makeEnvelope, Vec3 } from "./protocol.js";
import { Action, initialState, reduce, ViewState } from "./reducer.js";
import type { Transport } from "./transport.js";

export class SteerClient {
  state: ViewState = initialState;
  private seq = 0;
  private listeners: Array<(state: ViewState) => void> = [];

  constructor(private transport: Transport) {
    transport.onMessage((message) => this.dispatch({ type: "server-message", message }));
    transport.onStateChange((connected) =>
      this.dispatch({ type: connected ? "connected" : "disconnected" }),
    );
  }

  onChange(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
  }

  dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private nextSeq(): number {
    this.seq += 1;
    return this.seq;
  }

  moveFocus(target: Vec3): number {
    const seq = this.nextSeq();
    this.transport.send(makeEnvelope(seq, "MoveFocus", { target }));
    // optimistic pending marker until the ack (or error revert) arrives
    this.dispatch({ type: "command-sent", pending: { seq, verb: "MoveFocus", target } });
    return seq;
  }

  setTemperature(temperatureC: number): number {
    const seq = this.nextSeq();
    this.transport.send(makeEnvelope(seq, "SetTemperature", { temperature_c: temperatureC }));
    this.dispatch({ type: "command-sent", pending: { seq, verb: "SetTemperature" } });
    return seq;
  }

  startTrajectory(form: TrajectoryForm): number {
    const envelope = buildStartTrajectory(form, this.nextSeq());
    this.transport.send(envelope);
    this.dispatch({ type: "command-sent", pending: { seq: envelope.seq, verb: envelope.verb } });
    return envelope.seq;
  }

  stopTrajectory(): number {
    const envelope = buildStop(this.nextSeq());
    this.transport.send(envelope);
    this.dispatch({ type: "command-sent", pending: { seq: envelope.seq, verb: envelope.verb } });
    return envelope.seq;
  }

  subscribe(rateHz: number, fieldSlice?: Record<string, unknown>): number {
    const seq = this.nextSeq();
    this.transport.send(
      makeEnvelope(seq, "Subscribe", {
        rate: rateHz,
        particle: true,
        ...(fieldSlice ? { field_slice: fieldSlice } : {}),
      }),
    );
    return seq;
  }

  close(): void {
    this.transport.close();
  }
}
