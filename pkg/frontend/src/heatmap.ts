// SPL heatmap rendering and the pixel <-> plane-coordinate mapping.
// Painting goes through a small CellPainter interface so tests can count
// painted cells without a DOM canvas.

import type { SlicePayload, Vec3 } from "./protocol.js";

export interface CellPainter {
  paintCell(x: number, y: number, w: number, h: number, color: string): void;
  marker(x: number, y: number, kind: "focus" | "particle" | "pending"): void;
  clear(): void;
}

export interface Viewport {
  width: number;
  height: number;
}

// u (first plane axis) runs along pixel x; v (second axis) along pixel y,
// flipped so that +v points up.
export function planeToPixel(slice: SlicePayload, view: Viewport, u: number, v: number): [number, number] {
  const [nu, nv] = slice.shape;
  const uSpan = (nu - 1) * slice.pitch || 1;
  const vSpan = (nv - 1) * slice.pitch || 1;
  const px = ((u - slice.u0) / uSpan) * view.width;
  const py = view.height - ((v - slice.v0) / vSpan) * view.height;
  return [px, py];
}

export function pixelToPlane(slice: SlicePayload, view: Viewport, px: number, py: number): [number, number] {
  const [nu, nv] = slice.shape;
  const uSpan = (nu - 1) * slice.pitch || 1;
  const vSpan = (nv - 1) * slice.pitch || 1;
  const u = slice.u0 + (px / view.width) * uSpan;
  const v = slice.v0 + ((view.height - py) / view.height) * vSpan;
  return [u, v];
}

// A click on the plane becomes a full 3-D MoveFocus target by re-inserting
// the plane's fixed coordinate.
export function planePointToTarget(slice: SlicePayload, u: number, v: number): Vec3 {
  switch (slice.plane) {
    case "xy":
      return [u, v, slice.offset];
    case "xz":
      return [u, slice.offset, v];
    case "yz":
      return [slice.offset, u, v];
  }
}

export function focusToPlanePoint(slice: SlicePayload, focus: Vec3): [number, number] {
  switch (slice.plane) {
    case "xy":
      return [focus[0], focus[1]];
    case "xz":
      return [focus[0], focus[2]];
    case "yz":
      return [focus[1], focus[2]];
  }
}

export function hottestCell(slice: SlicePayload): { i: number; j: number; u: number; v: number } {
  let best = -Infinity;
  let bi = 0;
  let bj = 0;
  for (let i = 0; i < slice.shape[0]; i++) {
    const row = slice.spl_db[i];
    for (let j = 0; j < slice.shape[1]; j++) {
      if (row[j] > best) {
        best = row[j];
        bi = i;
        bj = j;
      }
    }
  }
  return { i: bi, j: bj, u: slice.u0 + bi * slice.pitch, v: slice.v0 + bj * slice.pitch };
}

const STOPS: Array<[number, [number, number, number]]> = [
  [0.0, [8, 8, 40]],
  [0.35, [120, 20, 110]],
  [0.65, [230, 80, 40]],
  [0.85, [250, 180, 40]],
  [1.0, [255, 250, 210]],
];

export function levelToColor(t: number): string {
  const x = Math.min(1, Math.max(0, t));
  for (let s = 1; s < STOPS.length; s++) {
    const [t1, c1] = STOPS[s - 1];
    const [t2, c2] = STOPS[s];
    if (x <= t2) {
      const f = (x - t1) / (t2 - t1 || 1);
      const rgb = c1.map((a, k) => Math.round(a + f * (c2[k] - a)));
      return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
    }
  }
  const last = STOPS[STOPS.length - 1][1];
  return `rgb(${last[0]},${last[1]},${last[2]})`;
}

export interface HeatmapOverlays {
  focus?: Vec3 | null;
  particle?: Vec3 | null;
  pending?: Vec3 | null;
}

// Returns the number of cells painted (handy for render-rate accounting).
export function renderHeatmap(
  slice: SlicePayload,
  view: Viewport,
  painter: CellPainter,
  overlays: HeatmapOverlays = {},
): number {
  const [nu, nv] = slice.shape;
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of slice.spl_db) {
    for (const value of row) {
      if (Number.isFinite(value)) {
        lo = Math.min(lo, value);
        hi = Math.max(hi, value);
      }
    }
  }
  const span = hi - lo || 1;
  const cw = view.width / nu;
  const ch = view.height / nv;
  painter.clear();
  let painted = 0;
  for (let i = 0; i < nu; i++) {
    for (let j = 0; j < nv; j++) {
      const t = (slice.spl_db[i][j] - lo) / span;
      // cell (i, j) centered on its sample point, v axis up
      painter.paintCell(i * cw, view.height - (j + 1) * ch, cw, ch, levelToColor(t));
      painted++;
    }
  }
  for (const [kind, point] of [
    ["focus", overlays.focus],
    ["particle", overlays.particle],
    ["pending", overlays.pending],
  ] as const) {
    if (point) {
      const [u, v] = focusToPlanePoint(slice, point);
      const [px, py] = planeToPixel(slice, view, u, v);
      painter.marker(px, py, kind);
    }
  }
  return painted;
}
