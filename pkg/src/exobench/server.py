"""Live transport for the operator console and raw telemetry taps.

serve() hosts two endpoints on adjacent ports:

  * port:     HTTP + WebSocket (/ws) speaking ConsoleMessage JSON:
              telemetry mirrors, target-angle updates, trial commands
              with authoritative trial_state echoes, and survey
              submissions (comfort map, satisfaction form, direction).
  * port + 1: plain TCP socket streaming wire-format telemetry frames,
              exactly the bytes a .exolog would contain.

Without hardware attached the server runs a demo rig: the pneumatic
plant under the bang-bang controller tracking the standard
lift-hold-lower trajectory, with a scripted arm following the target.
Every displayed trial state originates from the runner echo, never from
client-side prediction, so the console can stay stateless.
"""

from __future__ import annotations

import asyncio
import json
import math
import time
from dataclasses import dataclass

from .comfort import DirectionResponse, PressureMap, QuestForm
from .controller import MODE_CODES, AngleTrajectory, HysteresisController, \
    bang_bang_tick, command_for_mode, pressure_for_angle, trajectory_setpoint
from .plant import ActuatorState, PlantParams, step_pneumatics
from .protocol import STATIC_TARGET_DEG, StaticTrialFsm, StopReason
from .telemetry import (
    CtrlPayload,
    EventPayload,
    ImuPayload,
    PressurePayload,
    StreamId,
    StreamSequencer,
    TelemetryBus,
    encode_frame,
    frame_to_json,
)

# Transport deps are optional: everything except build_app/serve works
# without them.  The import must be module-level so the deferred "WebSocket"
# annotation on the endpoint resolves against module globals.
try:
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
except ImportError:  # pragma: no cover
    FastAPI = WebSocket = WebSocketDisconnect = None  # type: ignore

CONSOLE_KINDS = ("telemetry", "target", "trial_cmd", "trial_state",
                 "comfort_submit", "quest_submit", "direction_submit")

CTRL_DT = 1.0 / 200.0
WS_TELEMETRY_HZ = 20.0


class BadMessage(ValueError):
    pass


def console_message(kind: str, body: dict) -> dict:
    if kind not in CONSOLE_KINDS:
        raise BadMessage(f"unknown console message kind {kind!r}")
    return {"kind": kind, "body": body}


def parse_console_message(raw: str | bytes) -> tuple[str, dict]:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as e:
        raise BadMessage(f"not JSON: {e}") from e
    if not isinstance(obj, dict) or "kind" not in obj:
        raise BadMessage("message must be an object with a 'kind' field")
    kind = obj["kind"]
    if kind not in CONSOLE_KINDS:
        raise BadMessage(f"unknown console message kind {kind!r}")
    body = obj.get("body", {})
    if not isinstance(body, dict):
        raise BadMessage("'body' must be an object")
    return kind, body


def _quat_about_x(deg: float) -> tuple[float, float, float, float]:
    half = math.radians(deg) / 2.0
    return (math.cos(half), math.sin(half), 0.0, 0.0)


@dataclass
class TrialPhase:
    """Authoritative runner state echoed to every console."""

    state: str = "idle"             # idle | running | resting
    task: str = ""
    trial_no: int = 0
    rest_until: float = 0.0
    started_at: float = 0.0
    stop_reason: str = ""

    def snapshot(self, now: float) -> dict:
        return {
            "state": self.state,
            "task": self.task,
            "trial_no": self.trial_no,
            "elapsed_s": round(now - self.started_at, 3)
            if self.state == "running" else 0.0,
            "rest_remaining_s": max(0.0, round(self.rest_until - now, 3))
            if self.state == "resting" else 0.0,
            "stop_reason": self.stop_reason,
        }


class DemoRig:
    """Closed-loop plant + controller publishing onto a telemetry bus."""

    def __init__(self, plant: PlantParams | None = None,
                 rest_s: float = 5.0):
        self.plant = plant or PlantParams()
        self.trajectory = AngleTrajectory()
        self.bus = TelemetryBus()
        self.phase = TrialPhase()
        self.rest_s = rest_s
        self._ctrl = HysteresisController(setpoint=0.0)
        self._act = ActuatorState()
        self._theta = 0.0
        self._seq = {sid: StreamSequencer(sid) for sid in StreamId}
        self._t0 = time.monotonic()
        self._tick_no = 0
        self._last_target = 0.0
        self._static_fsm: StaticTrialFsm | None = None
        self._listeners: list[asyncio.Queue] = []

    # -- console fan-out ----------------------------------------------------

    def attach(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue(maxsize=512)
        self._listeners.append(q)
        return q

    def detach(self, q: asyncio.Queue) -> None:
        if q in self._listeners:
            self._listeners.remove(q)

    def _broadcast(self, message: dict) -> None:
        for q in list(self._listeners):
            try:
                q.put_nowait(message)
            except asyncio.QueueFull:
                # drop-oldest keeps a slow console from stalling the rig
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
                q.put_nowait(message)

    # -- command handling ---------------------------------------------------

    def handle_command(self, body: dict) -> dict:
        """Apply a trial_cmd; returns the trial_state echo (same id)."""
        cmd_id = body.get("id")
        action = body.get("action")
        now = time.monotonic() - self._t0
        echo: dict = {"id": cmd_id}
        if action == "start":
            if self.phase.state == "running":
                echo["error"] = "trial already running"
            elif self.phase.state == "resting" and now < self.phase.rest_until:
                echo["error"] = (f"rest timer active for another "
                                 f"{self.phase.rest_until - now:.1f} s")
            else:
                task = body.get("task", "dynamic_lift")
                self.phase = TrialPhase(state="running", task=task,
                                        trial_no=self.phase.trial_no + 1,
                                        started_at=now)
                self._static_fsm = StaticTrialFsm() \
                    if task == "static_hold" else None
                self._emit_event("trial_start",
                                 {"task": task, "trial_no": self.phase.trial_no})
        elif action == "stop":
            if self.phase.state != "running":
                echo["error"] = "no trial running"
            else:
                self._finish_trial(now, StopReason.VOLUNTARY_STOP.value)
        elif action == "advance":
            if self.phase.state != "resting":
                echo["error"] = "nothing to advance; not resting"
            else:
                self.phase.state = "idle"
        else:
            echo["error"] = f"unknown action {action!r}"
        echo.update(self.phase.snapshot(now))
        return console_message("trial_state", echo)

    def handle_submission(self, kind: str, body: dict) -> dict:
        """Validate a survey payload; echo acceptance with the same id."""
        sub_id = body.get("id")
        payload = body.get("payload", {})
        try:
            if kind == "comfort_submit":
                PressureMap.from_json(payload)
            elif kind == "quest_submit":
                QuestForm(participant=payload["participant"],
                          version=payload["version"],
                          scores=payload["scores"])
            else:
                DirectionResponse(participant=payload["participant"],
                                  version=payload["version"],
                                  direction=payload["direction"])
        except (KeyError, TypeError, ValueError) as e:
            return console_message(kind, {"id": sub_id, "accepted": False,
                                          "error": str(e)})
        return console_message(kind, {"id": sub_id, "accepted": True})

    # -- closed loop --------------------------------------------------------

    def _emit_event(self, kind: str, data: dict) -> None:
        t_us = int((time.monotonic() - self._t0) * 1e6)
        frame = self._seq[StreamId.EVENT].frame(t_us, EventPayload(kind, data))
        self.bus.publish(frame)
        self._broadcast(console_message("telemetry", frame_to_json(frame)))

    def _finish_trial(self, now: float, reason: str) -> None:
        self.phase.state = "resting"
        self.phase.stop_reason = reason
        self.phase.rest_until = now + self.rest_s
        self._static_fsm = None
        self._emit_event("trial_stop", {"stop_reason": reason,
                                        "trial_no": self.phase.trial_no})

    def tick(self) -> tuple:
        """One 200 Hz control step; returns the frames it published."""
        now = time.monotonic() - self._t0
        t_us = int(now * 1e6)
        running = self.phase.state == "running"

        if running and self.phase.task == "static_hold":
            target = STATIC_TARGET_DEG
        elif running:
            target = trajectory_setpoint(self.trajectory,
                                         (now - self.phase.started_at)
                                         % self.trajectory.duration)
        else:
            target = 0.0
        setpoint = pressure_for_angle(target, self.plant.p_max) if running \
            else 0.0

        self._ctrl, cmd = bang_bang_tick(self._ctrl.with_setpoint(setpoint),
                                         self._act.pressure)
        self._act = step_pneumatics(self._act, cmd, CTRL_DT, self.plant)
        # scripted arm: first-order pursuit of the target plus a soft sway
        self._theta += (target - self._theta) * (CTRL_DT / 0.2)
        self._last_target = target

        frames = [
            self._seq[StreamId.PRESSURE].frame(
                t_us, PressurePayload(self._act.pressure, setpoint)),
            self._seq[StreamId.CTRL].frame(
                t_us, CtrlPayload(MODE_CODES[self._ctrl.mode],
                                  command_for_mode(self._ctrl.mode).bits())),
        ]
        self._tick_no += 1
        if self._tick_no % 2 == 0:  # IMU at half the control rate: 100 Hz
            sway = 0.4 * math.sin(2.0 * math.pi * 0.23 * now)
            q = _quat_about_x(-(self._theta + sway))
            frames.append(self._seq[StreamId.IMU].frame(
                t_us, ImuPayload((1.0, 0.0, 0.0, 0.0), q,
                                 _quat_about_x(-(self._theta + sway + 10.0)))))
        for f in frames:
            self.bus.publish(f)

        if running and self._static_fsm is not None:
            reason = self._static_fsm.update(now - self.phase.started_at,
                                             self._theta)
            if reason is not None:
                self._finish_trial(now, reason.value)
        return tuple(frames)

    async def run(self) -> None:
        ws_every = max(1, int(round(1.0 / (WS_TELEMETRY_HZ * CTRL_DT))))
        k = 0
        next_tick = time.monotonic()
        while True:
            frames = self.tick()
            if k % ws_every == 0:
                for f in frames:
                    self._broadcast(
                        console_message("telemetry", frame_to_json(f)))
                self._broadcast(console_message("target", {
                    "t_s": round(time.monotonic() - self._t0, 4),
                    "target_deg": round(self._last_target, 3),
                    "setpoint_kpa": round(
                        pressure_for_angle(self._last_target,
                                           self.plant.p_max), 3),
                    "trial": self.phase.snapshot(time.monotonic() - self._t0),
                }))
            k += 1
            next_tick += CTRL_DT
            await asyncio.sleep(max(0.0, next_tick - time.monotonic()))


# ---------------------------------------------------------------------------
# Transports

async def _serve_tcp(rig: DemoRig, host: str, port: int):
    async def on_client(reader: asyncio.StreamReader,
                        writer: asyncio.StreamWriter) -> None:
        sub = rig.bus.subscribe(capacity=2048)
        try:
            while True:
                for frame in sub.drain():
                    writer.write(encode_frame(frame))
                await writer.drain()
                await asyncio.sleep(0.02)
        except (ConnectionResetError, BrokenPipeError, asyncio.CancelledError):
            pass
        finally:
            writer.close()

    return await asyncio.start_server(on_client, host, port)


def build_app(rig: DemoRig):
    """FastAPI app exposing the console WebSocket and a status endpoint."""
    if FastAPI is None:
        raise RuntimeError("fastapi is required for the console transport")

    app = FastAPI(title="exobench console transport")

    @app.get("/")
    def status() -> dict:
        return {
            "service": "exobench",
            "console_kinds": list(CONSOLE_KINDS),
            "trial": rig.phase.snapshot(time.monotonic() - rig._t0),
        }

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        queue = rig.attach()

        async def pump_out() -> None:
            while True:
                msg = await queue.get()
                await ws.send_text(json.dumps(msg, separators=(",", ":")))

        out_task = asyncio.create_task(pump_out())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    kind, body = parse_console_message(raw)
                except BadMessage as e:
                    await ws.send_text(json.dumps(console_message(
                        "trial_state", {"id": None, "error": str(e)})))
                    continue
                if kind == "trial_cmd":
                    reply = rig.handle_command(body)
                elif kind in ("comfort_submit", "quest_submit",
                              "direction_submit"):
                    reply = rig.handle_submission(kind, body)
                else:
                    reply = console_message("trial_state", {
                        "id": body.get("id"),
                        "error": f"clients cannot send {kind!r}"})
                await ws.send_text(json.dumps(reply, separators=(",", ":")))
        except WebSocketDisconnect:
            pass
        finally:
            out_task.cancel()
            rig.detach(queue)

    return app


def serve(port: int, host: str = "127.0.0.1") -> None:
    """Run the console transport on `port` and raw frames on `port + 1`."""
    import uvicorn

    rig = DemoRig()
    app = build_app(rig)

    async def main() -> None:
        tcp = await _serve_tcp(rig, host, port + 1)
        loop_task = asyncio.create_task(rig.run())
        config = uvicorn.Config(app, host=host, port=port, log_level="info")
        server = uvicorn.Server(config)
        try:
            await server.serve()
        finally:
            loop_task.cancel()
            tcp.close()
            await tcp.wait_closed()

    asyncio.run(main())
