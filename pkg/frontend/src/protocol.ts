// Wire vocabulary for the rig's operator websocket: every message is a
// one-level envelope {kind, body} of plain JSON, matching what the rig
// emits and accepts on /ws.

export const CONSOLE_KINDS = [
  "telemetry",
  "target",
  "trial_cmd",
  "trial_state",
  "comfort_submit",
  "quest_submit",
  "direction_submit",
] as const;

export type ConsoleKind = (typeof CONSOLE_KINDS)[number];

export class BadMessage extends Error {}

export interface ConsoleMessage {
  kind: ConsoleKind;
  body: Record<string, unknown>;
}

// -- telemetry frames (rig -> console) --------------------------------------

export type StreamName = "IMU" | "PRESSURE" | "EMG" | "CTRL" | "EVENT";

export interface ImuPayload {
  q_torso: number[];
  q_upper_arm: number[];
  q_forearm: number[];
  calib: number[];
}

export interface PressurePayload {
  pressure_kpa: number;
  setpoint_kpa: number;
}

export interface EmgPayload {
  ad: number[];
  md: number[];
  pd: number[];
}

export interface CtrlPayload {
  mode: number;
  valve_bits: number;
}

export interface EventPayload {
  kind: string;
  data: Record<string, unknown>;
}

export interface TelemetryFrame {
  stream: StreamName;
  seq: number;
  t_us: number;
  payload:
    | ImuPayload
    | PressurePayload
    | EmgPayload
    | CtrlPayload
    | EventPayload;
}

// -- trial state and commands ------------------------------------------------

export type TrialState = "idle" | "running" | "resting";
export type TrialAction = "start" | "stop" | "advance";

export interface TrialSnapshot {
  state: TrialState;
  task: string;
  trial_no: number;
  elapsed_s: number;
  rest_remaining_s: number;
  stop_reason: string | null;
}

export interface TargetBody {
  t_s: number;
  target_deg: number;
  setpoint_kpa: number;
  trial: TrialSnapshot;
}

export interface TrialCmdBody {
  id: string;
  action: TrialAction;
  task?: string;
}

// Command echo: the id of the command it answers, an error when the command
// was rejected, and always the authoritative trial snapshot.
export interface TrialStateBody extends TrialSnapshot {
  id: string | null;
  error?: string;
}

// -- survey submissions --------------------------------------------------------

export interface SubmissionBody {
  id: string;
  payload: Record<string, unknown>;
}

export interface SubmissionEchoBody {
  id: string | null;
  accepted: boolean;
  error?: string;
}

// Body-map template contract: cell index = y * width + x on a fixed grid.
export const TEMPLATE_GRID = { width: 200, height: 300 } as const;
export const N_CELLS = TEMPLATE_GRID.width * TEMPLATE_GRID.height;
export const MAX_INTENSITY = 3;

// Template asset as served next to the rig (region name -> flat cell indices).
export interface TemplateAsset {
  version: string;
  width: number;
  height: number;
  regions: Record<string, number[]>;
}

export const QUEST_ITEMS = [
  "size",
  "weight",
  "adjustability",
  "safety",
  "durability",
  "ease_of_use",
  "comfort",
  "effectiveness",
] as const;

export const QUEST_SCALE: readonly [number, number] = [0.0, 5.0];

export const DIRECTIONS = ["front", "side", "oblique"] as const;

// -- envelope handling ---------------------------------------------------------

export function consoleMessage(
  kind: ConsoleKind,
  body: Record<string, unknown>,
): ConsoleMessage {
  return { kind, body };
}

export function parseConsoleMessage(text: string): ConsoleMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (e) {
    throw new BadMessage(`not JSON: ${(e as Error).message}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new BadMessage("message must be an object with a 'kind' field");
  }
  const rec = obj as Record<string, unknown>;
  if (!("kind" in rec)) {
    throw new BadMessage("message must be an object with a 'kind' field");
  }
  const kind = rec.kind;
  if (
    typeof kind !== "string" ||
    !(CONSOLE_KINDS as readonly string[]).includes(kind)
  ) {
    throw new BadMessage(`unknown console message kind '${String(kind)}'`);
  }
  const body = rec.body ?? {};
  if (typeof body !== "object" || body === null || Array.isArray(body)) {
    throw new BadMessage("'body' must be an object");
  }
  return { kind: kind as ConsoleKind, body: body as Record<string, unknown> };
}

export function serializeConsoleMessage(msg: ConsoleMessage): string {
  return JSON.stringify({ kind: msg.kind, body: msg.body });
}

// Monotonic id factory; a prefix per surface keeps command and submission
// ids recognizable in logs.
export function idGenerator(prefix = "cmd"): () => string {
  let n = 0;
  return () => {
    n += 1;
    return `${prefix}-${n}`;
  };
}
