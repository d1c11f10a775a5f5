import { describe, expect, it } from "vitest";

import {
  parseConsoleMessage,
  StubRunner,
  TrialControl,
  type ConsoleMessage,
  type TrialAction,
} from "../src/index.js";
import { mulberry32, shuffled } from "./support.js";

// Test harness: commands the control sends are run through the stub runner
// and the echo is delivered back, unless the test wants to hold echoes.
function makeLink(now: () => number) {
  const runner = new StubRunner(now);
  const outbox: string[] = [];
  const control = new TrialControl((text) => outbox.push(text));
  const deliver = (): ConsoleMessage[] => {
    const echoes: ConsoleMessage[] = [];
    for (const text of outbox.splice(0)) {
      const cmd = parseConsoleMessage(text);
      echoes.push(runner.handleCommand(cmd.body));
    }
    for (const echo of echoes) {
      control.handleMessage(echo);
    }
    return echoes;
  };
  return { runner, control, deliver };
}

describe("trial control", () => {
  it("walks a full trial lifecycle with the rig's exact refusals", async () => {
    let t = 0;
    const { control, deliver } = makeLink(() => t);

    const start = control.start("static_hold");
    deliver();
    const r1 = await start.done;
    expect(r1.ok).toBe(true);
    expect(r1.state.id).toBe(start.id);
    expect(r1.state.state).toBe("running");
    expect(r1.state.task).toBe("static_hold");
    expect(r1.state.trial_no).toBe(1);

    t = 2.5;
    const dupe = control.start("static_hold");
    deliver();
    const r2 = await dupe.done;
    expect(r2.ok).toBe(false);
    expect(r2.error).toBe("trial already running");
    expect(r2.state.id).toBe(dupe.id);
    expect(r2.state.state).toBe("running");
    expect(r2.state.elapsed_s).toBe(2.5);

    t = 4;
    const stop = control.stop();
    deliver();
    const r3 = await stop.done;
    expect(r3.ok).toBe(true);
    expect(r3.state.state).toBe("resting");
    expect(r3.state.stop_reason).toBe("VoluntaryStop");
    expect(r3.state.rest_remaining_s).toBe(5);

    t = 6;
    const early = control.start();
    deliver();
    const r4 = await early.done;
    expect(r4.ok).toBe(false);
    expect(r4.error).toBe("rest timer active for another 3.0 s");

    t = 6.5;
    const advance = control.advance();
    deliver();
    const r5 = await advance.done;
    expect(r5.ok).toBe(true);
    expect(r5.state.state).toBe("idle");

    const advanceAgain = control.advance();
    deliver();
    const r6 = await advanceAgain.done;
    expect(r6.ok).toBe(false);
    expect(r6.error).toBe("nothing to advance; not resting");

    const stopIdle = control.stop();
    deliver();
    const r7 = await stopIdle.done;
    expect(r7.ok).toBe(false);
    expect(r7.error).toBe("no trial running");

    const bogus = control.command("jb" as TrialAction);
    deliver();
    const r8 = await bogus.done;
    expect(r8.ok).toBe(false);
    expect(r8.error).toBe("unknown action 'jb'");

    t = 10;
    const next = control.start();
    deliver();
    const r9 = await next.done;
    expect(r9.ok).toBe(true);
    expect(r9.state.task).toBe("dynamic_lift");
    expect(r9.state.trial_no).toBe(2);

    expect(control.pendingCount()).toBe(0);
    expect(control.unmatchedCount()).toBe(0);
  });

  it("round-trips 60 commands with matching ids even when echoes arrive shuffled", async () => {
    let t = 0;
    const runner = new StubRunner(() => t);
    const outbox: string[] = [];
    const control = new TrialControl((text) => outbox.push(text));

    // Scripted mix of valid and refused commands; the runner processes them
    // in send order, but delivery back to the console is shuffled.
    const actions: TrialAction[] = ["start", "start", "stop", "advance", "stop", "advance"];
    const issued: { id: string; done: Promise<unknown> }[] = [];
    const echoesById = new Map<string, ConsoleMessage>();
    for (let k = 0; k < 60; k++) {
      t = k * 7.0; // long steps so every rest timer expires before the next start
      const cmd = control.command(actions[k % actions.length]!);
      issued.push(cmd);
      const sent = parseConsoleMessage(outbox.splice(0)[0]!);
      const echo = runner.handleCommand(sent.body);
      echoesById.set((echo.body as { id: string }).id, echo);
    }
    expect(control.pendingCount()).toBe(60);
    expect(echoesById.size).toBe(60);

    const rng = mulberry32(0xbada55);
    for (const echo of shuffled([...echoesById.values()], rng)) {
      expect(control.handleMessage(echo)).toBe(true);
    }
    expect(control.pendingCount()).toBe(0);
    expect(control.unmatchedCount()).toBe(0);

    // Every command resolved with the body whose id matches its own.
    for (const cmd of issued) {
      const result = (await cmd.done) as {
        state: { id: string };
        ok: boolean;
        error?: string;
      };
      expect(result.state.id).toBe(cmd.id);
      const echoBody = echoesById.get(cmd.id)!.body as { error?: string };
      expect(result.ok).toBe(echoBody.error === undefined);
      expect(result.error).toBe(echoBody.error);
      expect(result.state).toEqual(echoesById.get(cmd.id)!.body);
    }
  });

  it("ignores stale and anonymous echoes without touching pending commands", () => {
    let t = 0;
    const { control, deliver } = makeLink(() => t);
    const cmd = control.start();

    const ghost: ConsoleMessage = {
      kind: "trial_state",
      body: {
        id: "ghost-1",
        state: "idle",
        task: "",
        trial_no: 0,
        elapsed_s: 0,
        rest_remaining_s: 0,
        stop_reason: null,
      },
    };
    expect(control.handleMessage(ghost)).toBe(false);
    expect(control.unmatchedCount()).toBe(1);
    expect(control.pendingCount()).toBe(1);

    // Broadcast snapshots without an id refresh state but resolve nothing.
    const anonymous: ConsoleMessage = {
      kind: "trial_state",
      body: { ...ghost.body, id: null },
    };
    expect(control.handleMessage(anonymous)).toBe(false);
    expect(control.latest()!.id).toBeNull();
    expect(control.pendingCount()).toBe(1);

    // Non trial_state kinds are not for this surface at all.
    expect(
      control.handleMessage({ kind: "target", body: { t_s: 0 } }),
    ).toBe(false);

    deliver();
    expect(control.pendingCount()).toBe(0);
    return cmd.done;
  });
});
