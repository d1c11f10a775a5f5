// Rolling window behind the live tracking plot. All storage is fixed-capacity
// ring buffers allocated once, so a session of any length holds memory flat
// while target updates and telemetry arrive at full rate.

import type {
  ConsoleMessage,
  EventPayload,
  PressurePayload,
  TargetBody,
  TelemetryFrame,
  TrialSnapshot,
} from "./protocol.js";

export interface TrackingConfig {
  windowS: number;
  rateHz: number;
}

export interface TargetSample {
  tS: number;
  targetDeg: number;
  setpointKpa: number;
}

export interface PressureSample {
  tS: number;
  pressureKpa: number;
}

export interface TrackingStats {
  capacity: number;
  targetSize: number;
  pressureSize: number;
  accepted: number;
  ignored: number;
  evicted: number;
  events: number;
}

// Fixed-capacity row ring over one interleaved Float64Array; push overwrites
// the oldest row once full and never reallocates.
class Ring {
  readonly capacity: number;
  readonly stride: number;
  private readonly buf: Float64Array;
  private next = 0;
  private filled = 0;

  constructor(capacity: number, stride: number) {
    if (!Number.isInteger(capacity) || capacity <= 0) {
      throw new RangeError(`ring capacity ${capacity} must be a positive integer`);
    }
    this.capacity = capacity;
    this.stride = stride;
    this.buf = new Float64Array(capacity * stride);
  }

  get size(): number {
    return this.filled;
  }

  push(row: number[]): boolean {
    const evicted = this.filled === this.capacity;
    const base = this.next * this.stride;
    for (let c = 0; c < this.stride; c++) {
      this.buf[base + c] = row[c]!;
    }
    this.next = (this.next + 1) % this.capacity;
    if (!evicted) {
      this.filled += 1;
    }
    return evicted;
  }

  rows(): number[][] {
    const out: number[][] = [];
    for (let k = 0; k < this.filled; k++) {
      const slot = (this.next - this.filled + k + this.capacity) % this.capacity;
      const row: number[] = [];
      for (let c = 0; c < this.stride; c++) {
        row.push(this.buf[slot * this.stride + c]!);
      }
      out.push(row);
    }
    return out;
  }
}

export class TrackingView {
  static readonly EVENT_LOG_LIMIT = 128;

  readonly capacity: number;
  private readonly targets: Ring;
  private readonly pressures: Ring;
  private readonly events: EventPayload[] = [];
  private lastTrial: TrialSnapshot | null = null;
  private accepted = 0;
  private ignored = 0;
  private evicted = 0;

  constructor(cfg: TrackingConfig = { windowS: 10, rateHz: 100 }) {
    if (!(cfg.windowS > 0) || !(cfg.rateHz > 0)) {
      throw new RangeError("windowS and rateHz must be positive");
    }
    this.capacity = Math.ceil(cfg.windowS * cfg.rateHz);
    this.targets = new Ring(this.capacity, 3);
    this.pressures = new Ring(this.capacity, 2);
  }

  // Returns true when the message fed one of the plotted series; anything
  // the view does not chart is counted and dropped.
  ingest(msg: ConsoleMessage): boolean {
    if (msg.kind === "target") {
      const b = msg.body as unknown as TargetBody;
      if (this.targets.push([b.t_s, b.target_deg, b.setpoint_kpa])) {
        this.evicted += 1;
      }
      this.lastTrial = b.trial;
      this.accepted += 1;
      return true;
    }
    if (msg.kind === "telemetry") {
      const frame = msg.body as unknown as TelemetryFrame;
      if (frame.stream === "PRESSURE") {
        const p = frame.payload as PressurePayload;
        if (this.pressures.push([frame.t_us * 1e-6, p.pressure_kpa])) {
          this.evicted += 1;
        }
        this.accepted += 1;
        return true;
      }
      if (frame.stream === "EVENT") {
        this.events.push(frame.payload as EventPayload);
        if (this.events.length > TrackingView.EVENT_LOG_LIMIT) {
          this.events.shift();
        }
        this.accepted += 1;
        return true;
      }
    }
    this.ignored += 1;
    return false;
  }

  window(): { targets: TargetSample[]; pressures: PressureSample[] } {
    return {
      targets: this.targets.rows().map(([tS, targetDeg, setpointKpa]) => ({
        tS: tS!,
        targetDeg: targetDeg!,
        setpointKpa: setpointKpa!,
      })),
      pressures: this.pressures.rows().map(([tS, pressureKpa]) => ({
        tS: tS!,
        pressureKpa: pressureKpa!,
      })),
    };
  }

  latestTrial(): TrialSnapshot | null {
    return this.lastTrial;
  }

  recentEvents(): EventPayload[] {
    return [...this.events];
  }

  stats(): TrackingStats {
    return {
      capacity: this.capacity,
      targetSize: this.targets.size,
      pressureSize: this.pressures.size,
      accepted: this.accepted,
      ignored: this.ignored,
      evicted: this.evicted,
      events: this.events.length,
    };
  }
}
