// Wire types for the steering service protocol (schema v:1).
// Requests and responses are JSON lines over a duplex socket; telemetry
// events arrive on the same connection after a Subscribe.

export const PROTOCOL_VERSION = 1;

export type Verb =
  | "MoveFocus"
  | "SetTemperature"
  | "StartTrajectory"
  | "Stop"
  | "QueryField"
  | "QueryParticle"
  | "Subscribe"
  | "Unsubscribe";

export interface CommandEnvelope {
  v: number;
  seq: number;
  verb: Verb;
  payload: Record<string, unknown>;
}

export type ServerKind = "response" | "error" | "telemetry" | "gap";

export interface ServerMessage {
  v: number;
  seq: number;
  kind: ServerKind;
  payload: Record<string, unknown>;
  ts: number;
}

export type Vec3 = [number, number, number];

export interface SlicePayload {
  plane: "xy" | "xz" | "yz";
  offset: number;
  u0: number;
  v0: number;
  pitch: number;
  shape: [number, number];
  spl_db: number[][];
  focus: Vec3;
}

export interface ParticlePayload {
  position: Vec3;
  velocity: Vec3;
}

export interface TelemetryPayload {
  focus: Vec3;
  temperature_c: number;
  trajectory_active: boolean;
  particle?: ParticlePayload | null;
  slice?: SlicePayload;
}

export function makeEnvelope(seq: number, verb: Verb, payload: Record<string, unknown>): CommandEnvelope {
  return { v: PROTOCOL_VERSION, seq, verb, payload };
}
