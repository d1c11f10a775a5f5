// Shared test helpers: a small deterministic PRNG, a shuffle, and a brute
// force stroke rasterizer kept deliberately independent of the production
// code path (full-grid scan, different distance formulation).

import type { GridSize, Stroke, StrokePoint } from "../src/comfortCanvas.js";

// mulberry32: tiny seedable PRNG, uniform on [0, 1).
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function shuffled<T>(items: T[], rng: () => number): T[] {
  const out = [...items];
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    const tmp = out[i]!;
    out[i] = out[j]!;
    out[j] = tmp;
  }
  return out;
}

// Point-to-segment distance by cases: distance to an endpoint when the
// projection falls outside the segment, else perpendicular distance via the
// cross product. Different algebra from the production clamped-projection.
function distPointSegment(
  px: number,
  py: number,
  a: StrokePoint,
  b: StrokePoint,
): number {
  const abx = b.x - a.x;
  const aby = b.y - a.y;
  const apx = px - a.x;
  const apy = py - a.y;
  const len2 = abx * abx + aby * aby;
  const dot = apx * abx + apy * aby;
  if (len2 === 0 || dot <= 0) {
    return Math.hypot(apx, apy);
  }
  if (dot >= len2) {
    return Math.hypot(px - b.x, py - b.y);
  }
  return Math.abs(apx * aby - apy * abx) / Math.sqrt(len2);
}

// Oracle: test every cell center on the whole grid against every segment.
export function oracleRasterize(stroke: Stroke, grid: GridSize): number[] {
  const pts = stroke.points;
  const out: number[] = [];
  if (pts.length === 0) {
    return out;
  }
  const nSegs = Math.max(1, pts.length - 1);
  for (let cy = 0; cy < grid.height; cy++) {
    for (let cx = 0; cx < grid.width; cx++) {
      const px = cx + 0.5;
      const py = cy + 0.5;
      let d = Infinity;
      for (let i = 0; i < nSegs; i++) {
        const a = pts[i]!;
        const b = pts[Math.min(i + 1, pts.length - 1)]!;
        d = Math.min(d, distPointSegment(px, py, a, b));
      }
      if (d <= stroke.radius) {
        out.push(cy * grid.width + cx);
      }
    }
  }
  return out;
}
