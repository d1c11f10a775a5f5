// Top-level wiring: owns the outgoing send function, dispatches every
// incoming console message to the right surface, and tracks survey
// submissions by id the same way trial commands are tracked.

import { buildComfortPayload, type GridSize, type Stroke } from "./comfortCanvas.js";
import {
  idGenerator,
  parseConsoleMessage,
  serializeConsoleMessage,
  TEMPLATE_GRID,
  type ConsoleKind,
  type ConsoleMessage,
  type SubmissionEchoBody,
} from "./protocol.js";
import { TrackingView, type TrackingConfig } from "./trackingView.js";
import { TrialControl } from "./trialControl.js";

export interface SubmissionResult {
  accepted: boolean;
  error?: string;
}

export interface PendingSubmission {
  id: string;
  done: Promise<SubmissionResult>;
}

export interface OperatorConsoleOptions {
  tracking?: TrackingConfig;
  grid?: GridSize;
}

const SUBMISSION_KINDS: readonly ConsoleKind[] = [
  "comfort_submit",
  "quest_submit",
  "direction_submit",
];

export class OperatorConsole {
  readonly tracking: TrackingView;
  readonly trials: TrialControl;
  readonly grid: GridSize;

  private readonly pendingSubmissions = new Map<
    string,
    (r: SubmissionResult) => void
  >();
  private readonly nextSubmissionId = idGenerator("sub");
  private unroutable = 0;

  constructor(
    private readonly send: (text: string) => void,
    opts: OperatorConsoleOptions = {},
  ) {
    this.tracking = new TrackingView(opts.tracking ?? { windowS: 10, rateHz: 100 });
    this.trials = new TrialControl(send);
    this.grid = opts.grid ?? TEMPLATE_GRID;
  }

  // Feed one raw websocket text frame; throws BadMessage on malformed input.
  onRawMessage(text: string): void {
    const msg = parseConsoleMessage(text);
    if (msg.kind === "telemetry" || msg.kind === "target") {
      this.tracking.ingest(msg);
      return;
    }
    if (msg.kind === "trial_state") {
      this.trials.handleMessage(msg);
      return;
    }
    if (SUBMISSION_KINDS.includes(msg.kind)) {
      this.resolveSubmission(msg);
      return;
    }
    // trial_cmd flows console -> rig only; arriving here means a confused peer.
    this.unroutable += 1;
  }

  private resolveSubmission(msg: ConsoleMessage): void {
    const body = msg.body as unknown as SubmissionEchoBody;
    const resolve = body.id == null ? undefined : this.pendingSubmissions.get(body.id);
    if (resolve === undefined) {
      this.unroutable += 1;
      return;
    }
    this.pendingSubmissions.delete(body.id as string);
    resolve(
      body.error === undefined
        ? { accepted: body.accepted }
        : { accepted: body.accepted, error: body.error },
    );
  }

  private submit(
    kind: ConsoleKind,
    payload: Record<string, unknown>,
  ): PendingSubmission {
    const id = this.nextSubmissionId();
    const done = new Promise<SubmissionResult>((resolve) => {
      this.pendingSubmissions.set(id, resolve);
    });
    this.send(serializeConsoleMessage({ kind, body: { id, payload } }));
    return { id, done };
  }

  submitComfort(
    participant: string,
    version: string,
    strokes: Stroke[],
  ): PendingSubmission {
    const payload = buildComfortPayload(participant, version, strokes, this.grid);
    return this.submit("comfort_submit", { ...payload });
  }

  submitQuest(
    participant: string,
    version: string,
    scores: Record<string, number>,
  ): PendingSubmission {
    return this.submit("quest_submit", { participant, version, scores });
  }

  submitDirection(
    participant: string,
    version: string,
    direction: string,
  ): PendingSubmission {
    return this.submit("direction_submit", { participant, version, direction });
  }

  pendingSubmissionCount(): number {
    return this.pendingSubmissions.size;
  }

  unroutableCount(): number {
    return this.unroutable;
  }
}
