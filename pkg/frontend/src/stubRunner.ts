// Offline twin of the rig's command surface for console tests: same envelope,
// same echo shapes, same error strings, driven by an injectable clock so
// tests control time instead of waiting it out.

import {
  consoleMessage,
  DIRECTIONS,
  MAX_INTENSITY,
  N_CELLS,
  QUEST_ITEMS,
  QUEST_SCALE,
  type ConsoleMessage,
  type TrialSnapshot,
  type TrialState,
} from "./protocol.js";

const DEFAULT_TASK = "dynamic_lift";
const VOLUNTARY_STOP = "VoluntaryStop";

function round3(x: number): number {
  return Math.round(x * 1000) / 1000;
}

// Rough mirror of how the rig's runtime prints values inside error strings:
// missing values print as None, strings are quoted.
function reprLite(v: unknown): string {
  if (v === undefined || v === null) {
    return "None";
  }
  if (typeof v === "string") {
    return `'${v}'`;
  }
  return String(v);
}

function requireKey(obj: Record<string, unknown>, key: string): unknown {
  if (!(key in obj)) {
    throw new Error(`'${key}'`);
  }
  return obj[key];
}

export class StubRunner {
  private state: TrialState = "idle";
  private task = "";
  private trialNo = 0;
  private startedAt = 0;
  private restUntil = 0;
  private stopReason: string | null = null;

  constructor(
    private readonly now: () => number = () => Date.now() / 1000,
    private readonly restS = 5.0,
  ) {}

  private snapshot(now: number): TrialSnapshot {
    return {
      state: this.state,
      task: this.task,
      trial_no: this.trialNo,
      elapsed_s: this.state === "running" ? round3(now - this.startedAt) : 0.0,
      rest_remaining_s:
        this.state === "resting" ? Math.max(0, round3(this.restUntil - now)) : 0.0,
      stop_reason: this.stopReason,
    };
  }

  handleCommand(body: Record<string, unknown>): ConsoleMessage {
    const now = this.now();
    const echo: Record<string, unknown> = { id: body.id ?? null };
    const action = body.action;
    if (action === "start") {
      if (this.state === "running") {
        echo.error = "trial already running";
      } else if (this.state === "resting" && now < this.restUntil) {
        echo.error = `rest timer active for another ${(this.restUntil - now).toFixed(1)} s`;
      } else {
        this.state = "running";
        this.task = typeof body.task === "string" ? body.task : DEFAULT_TASK;
        this.trialNo += 1;
        this.startedAt = now;
        this.stopReason = null;
      }
    } else if (action === "stop") {
      if (this.state !== "running") {
        echo.error = "no trial running";
      } else {
        this.state = "resting";
        this.restUntil = now + this.restS;
        this.stopReason = VOLUNTARY_STOP;
      }
    } else if (action === "advance") {
      if (this.state !== "resting") {
        echo.error = "nothing to advance; not resting";
      } else {
        this.state = "idle";
      }
    } else {
      echo.error = `unknown action ${reprLite(action)}`;
    }
    return consoleMessage("trial_state", { ...echo, ...this.snapshot(now) });
  }

  handleSubmission(
    kind: "comfort_submit" | "quest_submit" | "direction_submit",
    body: Record<string, unknown>,
  ): ConsoleMessage {
    const id = body.id ?? null;
    const payload = (body.payload ?? {}) as Record<string, unknown>;
    try {
      if (kind === "comfort_submit") {
        this.validateComfort(payload);
      } else if (kind === "quest_submit") {
        this.validateQuest(payload);
      } else {
        this.validateDirection(payload);
      }
    } catch (e) {
      return consoleMessage(kind, {
        id,
        accepted: false,
        error: (e as Error).message,
      });
    }
    return consoleMessage(kind, { id, accepted: true });
  }

  private validateComfort(payload: Record<string, unknown>): void {
    requireKey(payload, "participant");
    requireKey(payload, "version");
    const marks = payload.marks ?? [];
    if (!Array.isArray(marks)) {
      throw new Error("marks must be an array");
    }
    for (const m of marks as Record<string, unknown>[]) {
      const rawIntensity = Number(requireKey(m, "intensity"));
      if (!Number.isFinite(rawIntensity)) {
        throw new Error("intensity must be a number");
      }
      const intensity = Math.trunc(rawIntensity);
      if (intensity < 1 || intensity > MAX_INTENSITY) {
        throw new Error(`intensity ${intensity} outside 1..${MAX_INTENSITY}`);
      }
      const cells = requireKey(m, "cells");
      if (!Array.isArray(cells)) {
        throw new Error("cells must be an array");
      }
      for (const c of cells) {
        const idx = Math.trunc(Number(c));
        if (!Number.isFinite(idx) || idx < 0 || idx >= N_CELLS) {
          throw new Error(`cell index ${idx} out of range`);
        }
      }
    }
  }

  private validateQuest(payload: Record<string, unknown>): void {
    requireKey(payload, "participant");
    requireKey(payload, "version");
    const scores = requireKey(payload, "scores");
    if (typeof scores !== "object" || scores === null || Array.isArray(scores)) {
      throw new Error("scores must be an object");
    }
    const rec = scores as Record<string, unknown>;
    const unknown = Object.keys(rec)
      .filter((k) => !(QUEST_ITEMS as readonly string[]).includes(k))
      .sort();
    if (unknown.length > 0) {
      throw new Error(`unknown items: [${unknown.map((k) => `'${k}'`).join(", ")}]`);
    }
    const [lo, hi] = QUEST_SCALE;
    for (const [item, v] of Object.entries(rec)) {
      const x = Number(v);
      if (!(x >= lo && x <= hi)) {
        throw new Error(`${item} score ${String(v)} outside ${lo.toFixed(1)}..${hi.toFixed(1)}`);
      }
    }
  }

  private validateDirection(payload: Record<string, unknown>): void {
    requireKey(payload, "participant");
    requireKey(payload, "version");
    const direction = requireKey(payload, "direction");
    if (!(DIRECTIONS as readonly string[]).includes(direction as string)) {
      const tuple = `(${DIRECTIONS.map((d) => `'${d}'`).join(", ")})`;
      throw new Error(
        `direction must be one of ${tuple}, got ${reprLite(direction)}`,
      );
    }
  }
}
