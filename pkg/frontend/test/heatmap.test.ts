import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  CellPainter,
  focusToPlanePoint,
  hottestCell,
  levelToColor,
  pixelToPlane,
  planePointToTarget,
  planeToPixel,
  renderHeatmap,
} from "../src/heatmap.js";
import type { ServerMessage, SlicePayload, TelemetryPayload } from "../src/protocol.js";

const fixture: ServerMessage = JSON.parse(
  readFileSync(new URL("./fixtures/telemetry_slice.json", import.meta.url), "utf-8"),
);
const telemetry = fixture.payload as unknown as TelemetryPayload;
const slice = telemetry.slice as SlicePayload;

class RecordingPainter implements CellPainter {
  cells: Array<{ x: number; y: number; color: string }> = [];
  markers: Array<{ x: number; y: number; kind: string }> = [];
  cleared = 0;

  clear(): void {
    this.cleared++;
    this.cells = [];
    this.markers = [];
  }

  paintCell(x: number, y: number, _w: number, _h: number, color: string): void {
    this.cells.push({ x, y, color });
  }

  marker(x: number, y: number, kind: string): void {
    this.markers.push({ x, y, kind });
  }
}

const view = { width: 480, height: 480 };

describe("heatmap with the recorded service fixture", () => {
  it("puts the hottest cell within one grid cell of the focus marker", () => {
    const hot = hottestCell(slice);
    const [fu, fv] = focusToPlanePoint(slice, telemetry.focus);
    expect(Math.abs(hot.u - fu)).toBeLessThanOrEqual(slice.pitch);
    expect(Math.abs(hot.v - fv)).toBeLessThanOrEqual(slice.pitch);
  });

  it("renders every cell and the focus marker", () => {
    const painter = new RecordingPainter();
    const painted = renderHeatmap(slice, view, painter, { focus: telemetry.focus });
    expect(painted).toBe(slice.shape[0] * slice.shape[1]);
    expect(painter.cells.length).toBe(painted);
    expect(painter.markers).toHaveLength(1);
    const [fu, fv] = focusToPlanePoint(slice, telemetry.focus);
    const [px, py] = planeToPixel(slice, view, fu, fv);
    expect(painter.markers[0].x).toBeCloseTo(px);
    expect(painter.markers[0].y).toBeCloseTo(py);
  });

  it("maps a click back to plane coordinates within one grid cell", () => {
    const [fu, fv] = focusToPlanePoint(slice, telemetry.focus);
    const [px, py] = planeToPixel(slice, view, fu, fv);
    const [u, v] = pixelToPlane(slice, view, px, py);
    expect(Math.abs(u - fu)).toBeLessThanOrEqual(slice.pitch);
    expect(Math.abs(v - fv)).toBeLessThanOrEqual(slice.pitch);
    const target = planePointToTarget(slice, u, v);
    expect(Math.abs(target[0] - telemetry.focus[0])).toBeLessThanOrEqual(slice.pitch);
    expect(target[1]).toBeCloseTo(slice.offset); // xz plane: y is the fixed axis
    expect(Math.abs(target[2] - telemetry.focus[2])).toBeLessThanOrEqual(slice.pitch);
  });

  it("round-trips the plot center pixel", () => {
    const [u, v] = pixelToPlane(slice, view, view.width / 2, view.height / 2);
    const [px, py] = planeToPixel(slice, view, u, v);
    expect(px).toBeCloseTo(view.width / 2);
    expect(py).toBeCloseTo(view.height / 2);
  });
});

describe("heatmap color mapping", () => {
  it("renders a uniform slice with a single color", () => {
    const uniform: SlicePayload = {
      plane: "xz",
      offset: 0,
      u0: -10,
      v0: 90,
      pitch: 2,
      shape: [5, 5],
      spl_db: Array.from({ length: 5 }, () => Array(5).fill(120)),
      focus: [0, 0, 100],
    };
    const painter = new RecordingPainter();
    renderHeatmap(uniform, view, painter);
    const colors = new Set(painter.cells.map((c) => c.color));
    expect(colors.size).toBe(1);
  });

  it("clamps the color scale to [0, 1]", () => {
    expect(levelToColor(-1)).toBe(levelToColor(0));
    expect(levelToColor(2)).toBe(levelToColor(1));
  });
});
