// Body-map capture: the operator paints strokes over the silhouette grid and
// each stroke becomes one {cells, intensity} mark in the submission payload.
// A stroke sweeps a round brush along its polyline; a cell is covered when
// its center lies within one brush radius of the polyline.

import {
  MAX_INTENSITY,
  TEMPLATE_GRID,
  type ConsoleMessage,
  consoleMessage,
} from "./protocol.js";

export interface GridSize {
  width: number;
  height: number;
}

export interface StrokePoint {
  x: number;
  y: number;
}

export interface Stroke {
  points: StrokePoint[];
  radius: number;
  intensity: number;
}

export interface MarkJson {
  cells: number[];
  intensity: number;
}

export interface ComfortPayload {
  participant: string;
  version: string;
  marks: MarkJson[];
}

// Distance from (px, py) to segment a-b via clamped projection; a degenerate
// segment (a == b) reduces to point distance.
function segmentDistance(
  px: number,
  py: number,
  ax: number,
  ay: number,
  bx: number,
  by: number,
): number {
  const dx = bx - ax;
  const dy = by - ay;
  const len2 = dx * dx + dy * dy;
  let t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0;
  t = Math.max(0, Math.min(1, t));
  return Math.hypot(px - (ax + t * dx), py - (ay + t * dy));
}

export function rasterizeStroke(stroke: Stroke, grid: GridSize = TEMPLATE_GRID): number[] {
  const { width, height } = grid;
  const r = stroke.radius;
  if (!(r > 0)) {
    throw new RangeError(`brush radius ${r} must be positive`);
  }
  const pts = stroke.points;
  const hit = new Set<number>();
  // A single point is treated as one degenerate segment (a brush dab).
  const nSegs = pts.length === 0 ? 0 : Math.max(1, pts.length - 1);
  for (let i = 0; i < nSegs; i++) {
    const a = pts[i]!;
    const b = pts[Math.min(i + 1, pts.length - 1)]!;
    // Only cells whose center can be within reach: bounding box of the
    // segment grown by r, widened one cell to keep the cut conservative.
    const x0 = Math.max(0, Math.floor(Math.min(a.x, b.x) - r - 0.5) - 1);
    const x1 = Math.min(width - 1, Math.ceil(Math.max(a.x, b.x) + r - 0.5) + 1);
    const y0 = Math.max(0, Math.floor(Math.min(a.y, b.y) - r - 0.5) - 1);
    const y1 = Math.min(height - 1, Math.ceil(Math.max(a.y, b.y) + r - 0.5) + 1);
    for (let cy = y0; cy <= y1; cy++) {
      for (let cx = x0; cx <= x1; cx++) {
        if (segmentDistance(cx + 0.5, cy + 0.5, a.x, a.y, b.x, b.y) <= r) {
          hit.add(cy * width + cx);
        }
      }
    }
  }
  return [...hit].sort((lhs, rhs) => lhs - rhs);
}

// One mark per stroke; strokes that never touch the grid are dropped rather
// than submitted empty.
export function strokesToMarks(
  strokes: Stroke[],
  grid: GridSize = TEMPLATE_GRID,
): MarkJson[] {
  const marks: MarkJson[] = [];
  for (const s of strokes) {
    if (!Number.isInteger(s.intensity) || s.intensity < 1 || s.intensity > MAX_INTENSITY) {
      throw new RangeError(`intensity ${s.intensity} outside 1..${MAX_INTENSITY}`);
    }
    const cells = rasterizeStroke(s, grid);
    if (cells.length > 0) {
      marks.push({ cells, intensity: s.intensity });
    }
  }
  return marks;
}

export function buildComfortPayload(
  participant: string,
  version: string,
  strokes: Stroke[],
  grid: GridSize = TEMPLATE_GRID,
): ComfortPayload {
  return { participant, version, marks: strokesToMarks(strokes, grid) };
}

export function comfortSubmitMessage(
  id: string,
  payload: ComfortPayload,
): ConsoleMessage {
  return consoleMessage("comfort_submit", { id, payload: { ...payload } });
}
