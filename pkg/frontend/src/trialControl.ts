// Trial command tracking. Every outgoing command carries a fresh id and the
// rig echoes that id back on its trial_state reply, so resolution is by id
// alone and late or interleaved echoes still land on the right caller.

import {
  idGenerator,
  serializeConsoleMessage,
  type ConsoleMessage,
  type TrialAction,
  type TrialCmdBody,
  type TrialStateBody,
} from "./protocol.js";

export interface CommandResult {
  ok: boolean;
  error?: string;
  state: TrialStateBody;
}

export interface PendingCommand {
  id: string;
  done: Promise<CommandResult>;
}

export class TrialControl {
  private readonly pending = new Map<string, (r: CommandResult) => void>();
  private lastState: TrialStateBody | null = null;
  private unmatched = 0;

  constructor(
    private readonly send: (text: string) => void,
    private readonly nextId: () => string = idGenerator("cmd"),
  ) {}

  command(action: TrialAction, task?: string): PendingCommand {
    const id = this.nextId();
    const body: TrialCmdBody =
      task === undefined ? { id, action } : { id, action, task };
    const done = new Promise<CommandResult>((resolve) => {
      this.pending.set(id, resolve);
    });
    this.send(serializeConsoleMessage({ kind: "trial_cmd", body: { ...body } }));
    return { id, done };
  }

  start(task?: string): PendingCommand {
    return this.command("start", task);
  }

  stop(): PendingCommand {
    return this.command("stop");
  }

  advance(): PendingCommand {
    return this.command("advance");
  }

  // Returns true when the message resolved a pending command. Echoes with an
  // unknown or missing id still refresh the latest snapshot (the rig is
  // authoritative) but are counted as unmatched.
  handleMessage(msg: ConsoleMessage): boolean {
    if (msg.kind !== "trial_state") {
      return false;
    }
    const body = msg.body as unknown as TrialStateBody;
    this.lastState = body;
    const resolve = body.id == null ? undefined : this.pending.get(body.id);
    if (resolve === undefined) {
      this.unmatched += 1;
      return false;
    }
    this.pending.delete(body.id as string);
    const result: CommandResult =
      body.error === undefined
        ? { ok: true, state: body }
        : { ok: false, error: body.error, state: body };
    resolve(result);
    return true;
  }

  latest(): TrialStateBody | null {
    return this.lastState;
  }

  pendingCount(): number {
    return this.pending.size;
  }

  unmatchedCount(): number {
    return this.unmatched;
  }
}
