// Trajectory form validation and command construction. The kinematic
// identity speed = step_size * refresh_rate must hold within 0.5% before a
// StartTrajectory is emitted; violations surface as inline form errors.

import { CommandEnvelope, makeEnvelope } from "./protocol.js";

export interface TrajectoryForm {
  shape: "linear" | "circular";
  size_mm: number;
  speed: number;
  step_size: number;
  height: number;
  refresh_hz: number;
}

export function validateTrajectoryForm(form: TrajectoryForm): string[] {
  const errors: string[] = [];
  if (form.shape !== "linear" && form.shape !== "circular") {
    errors.push("shape must be linear or circular");
  }
  if (!(form.size_mm >= 0)) {
    errors.push("size must be >= 0");
  }
  if (!(form.step_size > 0)) {
    errors.push("step size must be > 0");
  }
  if (!(form.refresh_hz > 0)) {
    errors.push("refresh rate must be > 0");
  }
  if (!(form.speed >= 0)) {
    errors.push("speed must be >= 0");
  }
  if (form.speed > 0 && form.step_size > 0 && form.refresh_hz > 0) {
    const implied = form.step_size * form.refresh_hz;
    if (Math.abs(implied - form.speed) / form.speed > 0.005) {
      errors.push(
        `speed ${form.speed} != step x refresh = ${implied.toFixed(1)} mm/s (0.5% tolerance)`,
      );
    }
  }
  if (form.speed === 0 && form.size_mm > 0) {
    errors.push("a moving path needs a positive speed");
  }
  return errors;
}

export function buildStartTrajectory(form: TrajectoryForm, seq: number): CommandEnvelope {
  const errors = validateTrajectoryForm(form);
  if (errors.length) {
    throw new Error(errors.join("; "));
  }
  return makeEnvelope(seq, "StartTrajectory", {
    shape: form.shape,
    size_mm: form.size_mm,
    speed: form.speed,
    step_size: form.step_size,
    height: form.height,
  });
}

export function buildStop(seq: number): CommandEnvelope {
  return makeEnvelope(seq, "Stop", {});
}
