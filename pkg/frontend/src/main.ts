// Browser bootstrap: canvas heatmap, click-to-move, trajectory form.
// Connects over a WebSocket bridge to the service's TCP port, e.g.
//   websockify 8152 127.0.0.1:8151
// then open index.html with ?bridge=ws://localhost:8152

import { SteerClient } from "./client.js";
import { validateTrajectoryForm } from "./controls.js";
import {
  CellPainter,
  hottestCell,
  pixelToPlane,
  planePointToTarget,
  renderHeatmap,
} from "./heatmap.js";
import type { SlicePayload, Vec3 } from "./protocol.js";
import { WsJsonlTransport } from "./transport.js";

class CanvasPainter implements CellPainter {
  constructor(private ctx: CanvasRenderingContext2D, private width: number, private height: number) {}

  clear(): void {
    this.ctx.clearRect(0, 0, this.width, this.height);
  }

  paintCell(x: number, y: number, w: number, h: number, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.fillRect(x, y, w + 0.5, h + 0.5);
  }

  marker(x: number, y: number, kind: "focus" | "particle" | "pending"): void {
    const ctx = this.ctx;
    ctx.lineWidth = 2;
    if (kind === "focus") {
      ctx.strokeStyle = "#ffffff";
      ctx.beginPath();
      ctx.moveTo(x - 7, y);
      ctx.lineTo(x + 7, y);
      ctx.moveTo(x, y - 7);
      ctx.lineTo(x, y + 7);
      ctx.stroke();
    } else if (kind === "pending") {
      ctx.strokeStyle = "#9be7ff";
      ctx.setLineDash([3, 3]);
      ctx.beginPath();
      ctx.arc(x, y, 8, 0, 2 * Math.PI);
      ctx.stroke();
      ctx.setLineDash([]);
    } else {
      ctx.strokeStyle = "#40e0d0";
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
}

function text(id: string, value: string): void {
  const el = document.getElementById(id);
  if (el) el.textContent = value;
}

export function start(): void {
  const params = new URLSearchParams(location.search);
  const bridge = params.get("bridge") ?? `ws://${location.hostname}:8152`;
  const canvas = document.getElementById("steer-canvas") as HTMLCanvasElement | null;
  if (!canvas) {
    console.error("missing #steer-canvas");
    return;
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const painter = new CanvasPainter(ctx, canvas.width, canvas.height);
  const view = { width: canvas.width, height: canvas.height };

  const client = new SteerClient(new WsJsonlTransport(bridge));
  let lastSlice: SlicePayload | null = null;

  client.onChange((state) => {
    text("status", state.connection);
    text("gaps", state.gapCount > 0 ? `telemetry gap x${state.gapCount}` : "");
    text("notices", state.notices.join(" | "));
    const slice = state.telemetry?.slice;
    if (slice) {
      lastSlice = slice;
      renderHeatmap(slice, view, painter, {
        focus: state.telemetry?.focus ?? null,
        particle: state.telemetry?.particle?.position ?? null,
        pending: state.pending?.target ?? null,
      });
      const hot = hottestCell(slice);
      text("hotspot", `peak at (${hot.u.toFixed(1)}, ${hot.v.toFixed(1)}) mm`);
    }
  });

  canvas.addEventListener("click", (event) => {
    if (!lastSlice || client.state.connection !== "connected") return;
    const rect = canvas.getBoundingClientRect();
    const [u, v] = pixelToPlane(lastSlice, view, event.clientX - rect.left, event.clientY - rect.top);
    const target: Vec3 = planePointToTarget(lastSlice, u, v);
    client.moveFocus(target);
  });

  const form = document.getElementById("trajectory-form") as HTMLFormElement | null;
  form?.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const spec = {
      shape: (data.get("shape") as "linear" | "circular") ?? "circular",
      size_mm: Number(data.get("size")),
      speed: Number(data.get("speed")),
      step_size: Number(data.get("step")),
      height: Number(data.get("height") ?? 100),
      refresh_hz: Number(data.get("speed")) / Number(data.get("step")),
    };
    const errors = validateTrajectoryForm(spec);
    if (errors.length) {
      text("form-errors", errors.join("; "));
      return;
    }
    text("form-errors", "");
    client.startTrajectory(spec);
  });
  document.getElementById("stop-button")?.addEventListener("click", () => client.stopTrajectory());

  const temperature = document.getElementById("temperature") as HTMLInputElement | null;
  temperature?.addEventListener("change", () => client.setTemperature(Number(temperature.value)));

  client.subscribe(10, { plane: "xz", offset: 0, extent: 60, cells: 48 });
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.addEventListener("load", start);
}
