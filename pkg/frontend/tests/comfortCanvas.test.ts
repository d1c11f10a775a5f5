import { describe, expect, it } from "vitest";

import {
  buildComfortPayload,
  comfortSubmitMessage,
  rasterizeStroke,
  strokesToMarks,
  TEMPLATE_GRID,
  type Stroke,
} from "../src/index.js";
import { mulberry32, oracleRasterize } from "./support.js";

const GRID = { width: TEMPLATE_GRID.width, height: TEMPLATE_GRID.height };

function scriptedStrokeSet(rng: () => number): Stroke[] {
  const strokes: Stroke[] = [];
  const n = 1 + Math.floor(rng() * 5);
  for (let s = 0; s < n; s++) {
    const nPts = 1 + Math.floor(rng() * 6);
    const points = [];
    for (let p = 0; p < nPts; p++) {
      // Deliberately allowed to leave the grid so clamping gets exercised.
      points.push({ x: -20 + rng() * 240, y: -20 + rng() * 340 });
    }
    strokes.push({
      points,
      radius: 0.5 + rng() * 11.5,
      intensity: 1 + Math.floor(rng() * 3),
    });
  }
  return strokes;
}

describe("comfort canvas rasterization", () => {
  it("matches the brute force oracle for 20 scripted stroke sets", () => {
    const rng = mulberry32(0xc0ffee);
    for (let set = 0; set < 20; set++) {
      const strokes = scriptedStrokeSet(rng);
      const payload = buildComfortPayload(`p${set + 1}`, "v1", strokes, GRID);
      const expected = strokes
        .map((s) => ({ cells: oracleRasterize(s, GRID), intensity: s.intensity }))
        .filter((m) => m.cells.length > 0);
      expect(payload.marks).toEqual(expected);
    }
  });

  it("covers exactly the brush disc for a single dab", () => {
    const stroke: Stroke = {
      points: [{ x: 100.5, y: 150.5 }],
      radius: 4.25,
      intensity: 2,
    };
    const cells = rasterizeStroke(stroke, GRID);
    expect(cells).toEqual(oracleRasterize(stroke, GRID));
    // Every covered cell center lies inside the disc.
    for (const c of cells) {
      const cx = (c % GRID.width) + 0.5;
      const cy = Math.floor(c / GRID.width) + 0.5;
      expect(Math.hypot(cx - 100.5, cy - 150.5)).toBeLessThanOrEqual(4.25);
    }
    expect(cells.length).toBeGreaterThan(40);
  });

  it("returns sorted unique cells even when the polyline doubles back", () => {
    const stroke: Stroke = {
      points: [
        { x: 20, y: 30 },
        { x: 60, y: 30 },
        { x: 20, y: 30 },
        { x: 60, y: 30 },
      ],
      radius: 3,
      intensity: 1,
    };
    const cells = rasterizeStroke(stroke, GRID);
    expect(new Set(cells).size).toBe(cells.length);
    const resorted = [...cells].sort((a, b) => a - b);
    expect(cells).toEqual(resorted);
    expect(cells).toEqual(oracleRasterize(stroke, GRID));
  });

  it("drops strokes that never touch the grid", () => {
    const outside: Stroke = {
      points: [
        { x: -50, y: -50 },
        { x: -40, y: -60 },
      ],
      radius: 5,
      intensity: 3,
    };
    const inside: Stroke = {
      points: [{ x: 10, y: 10 }],
      radius: 2,
      intensity: 1,
    };
    const marks = strokesToMarks([outside, inside], GRID);
    expect(marks).toHaveLength(1);
    expect(marks[0]!.intensity).toBe(1);
  });

  it("clips cells to the grid for strokes crossing the border", () => {
    const stroke: Stroke = {
      points: [
        { x: -10, y: 5 },
        { x: 15, y: 5 },
      ],
      radius: 4,
      intensity: 2,
    };
    const cells = rasterizeStroke(stroke, GRID);
    expect(cells.length).toBeGreaterThan(0);
    for (const c of cells) {
      expect(c).toBeGreaterThanOrEqual(0);
      expect(c).toBeLessThan(GRID.width * GRID.height);
    }
    expect(cells).toEqual(oracleRasterize(stroke, GRID));
  });

  it("rejects invalid intensity and radius", () => {
    const pts = [{ x: 5, y: 5 }];
    expect(() =>
      strokesToMarks([{ points: pts, radius: 2, intensity: 0 }], GRID),
    ).toThrow(RangeError);
    expect(() =>
      strokesToMarks([{ points: pts, radius: 2, intensity: 4 }], GRID),
    ).toThrow(RangeError);
    expect(() =>
      strokesToMarks([{ points: pts, radius: 2, intensity: 1.5 }], GRID),
    ).toThrow(RangeError);
    expect(() =>
      strokesToMarks([{ points: pts, radius: 0, intensity: 1 }], GRID),
    ).toThrow(RangeError);
  });

  it("builds the submission payload in the shape the rig accepts", () => {
    const strokes: Stroke[] = [
      { points: [{ x: 100, y: 120 }], radius: 3, intensity: 2 },
    ];
    const payload = buildComfortPayload("p07", "v2", strokes, GRID);
    expect(Object.keys(payload).sort()).toEqual(["marks", "participant", "version"]);
    expect(payload.participant).toBe("p07");
    expect(payload.version).toBe("v2");
    expect(payload.marks[0]!.intensity).toBe(2);

    const msg = comfortSubmitMessage("sub-1", payload);
    expect(msg.kind).toBe("comfort_submit");
    expect(msg.body.id).toBe("sub-1");
    expect((msg.body.payload as { participant: string }).participant).toBe("p07");
  });
});
