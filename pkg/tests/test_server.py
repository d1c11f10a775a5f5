import json

import pytest

from exobench.comfort import Mark, PressureMap
from exobench.server import (
    BadMessage,
    DemoRig,
    build_app,
    console_message,
    parse_console_message,
)
from exobench.telemetry import StreamId


# ---------------------------------------------------------------------------
# Message envelope


def test_console_message_wraps_kind_and_body():
    msg = console_message("target", {"target_deg": 45.0})
    assert msg == {"kind": "target", "body": {"target_deg": 45.0}}
    with pytest.raises(BadMessage):
        console_message("telepathy", {})


def test_parse_console_message():
    kind, body = parse_console_message(
        json.dumps({"kind": "trial_cmd", "body": {"action": "start"}}))
    assert kind == "trial_cmd" and body == {"action": "start"}
    kind, body = parse_console_message(json.dumps({"kind": "target"}))
    assert body == {}  # body optional
    for bad in ("not json", json.dumps(["kind"]), json.dumps({"body": {}}),
                json.dumps({"kind": "nope"}),
                json.dumps({"kind": "target", "body": 3})):
        with pytest.raises(BadMessage):
            parse_console_message(bad)


# ---------------------------------------------------------------------------
# Trial command lifecycle


def test_command_lifecycle_echoes_state():
    rig = DemoRig(rest_s=5.0)

    echo = rig.handle_command({"id": "c1", "action": "start",
                               "task": "dynamic_lift"})
    assert echo["kind"] == "trial_state"
    body = echo["body"]
    assert body["id"] == "c1"
    assert "error" not in body
    assert body["state"] == "running" and body["trial_no"] == 1
    assert body["task"] == "dynamic_lift"

    dup = rig.handle_command({"id": "c2", "action": "start"})
    assert dup["body"]["error"] == "trial already running"
    assert dup["body"]["id"] == "c2"

    stop = rig.handle_command({"id": "c3", "action": "stop"})
    assert stop["body"]["state"] == "resting"
    assert stop["body"]["stop_reason"] == "VoluntaryStop"
    assert stop["body"]["rest_remaining_s"] > 0

    blocked = rig.handle_command({"id": "c4", "action": "start"})
    assert blocked["body"]["error"].startswith("rest timer active for another")

    advanced = rig.handle_command({"id": "c5", "action": "advance"})
    assert "error" not in advanced["body"]
    assert advanced["body"]["state"] == "idle"

    again = rig.handle_command({"id": "c6", "action": "advance"})
    assert again["body"]["error"] == "nothing to advance; not resting"

    nostop = rig.handle_command({"id": "c7", "action": "stop"})
    assert nostop["body"]["error"] == "no trial running"

    unknown = rig.handle_command({"id": "c8", "action": "warp"})
    assert unknown["body"]["error"] == "unknown action 'warp'"

    restart = rig.handle_command({"id": "c9", "action": "start"})
    assert restart["body"]["state"] == "running"
    assert restart["body"]["trial_no"] == 2


# ---------------------------------------------------------------------------
# Survey submissions


def test_submission_acceptance_and_rejection():
    rig = DemoRig()
    pm = PressureMap(participant="p01", version="v1",
                     marks=(Mark(cells=(1, 2), intensity=2),))
    ok = rig.handle_submission("comfort_submit",
                               {"id": "s1", "payload": pm.to_json()})
    assert ok["kind"] == "comfort_submit"
    assert ok["body"] == {"id": "s1", "accepted": True}

    missing = rig.handle_submission("comfort_submit",
                                    {"id": "s2", "payload": {"marks": []}})
    assert missing["body"]["accepted"] is False
    assert missing["body"]["error"]

    quest_ok = rig.handle_submission("quest_submit", {
        "id": "s3",
        "payload": {"participant": "p01", "version": "v2",
                    "scores": {"size": 4.0, "comfort": 5.0}}})
    assert quest_ok["body"]["accepted"] is True

    quest_bad = rig.handle_submission("quest_submit", {
        "id": "s4",
        "payload": {"participant": "p01", "version": "v2",
                    "scores": {"size": 9.0}}})
    assert quest_bad["body"]["accepted"] is False

    dir_ok = rig.handle_submission("direction_submit", {
        "id": "s5",
        "payload": {"participant": "p01", "version": "v1",
                    "direction": "side"}})
    assert dir_ok["body"]["accepted"] is True

    dir_bad = rig.handle_submission("direction_submit", {
        "id": "s6",
        "payload": {"participant": "p01", "version": "v1",
                    "direction": "up"}})
    assert dir_bad["body"]["accepted"] is False


# ---------------------------------------------------------------------------
# Closed-loop ticking and the telemetry bus


def test_tick_frame_cadence_and_bus():
    rig = DemoRig()
    sub = rig.bus.subscribe(capacity=64)

    first = rig.tick()
    assert [f.stream_id for f in first] == [StreamId.PRESSURE, StreamId.CTRL]
    second = rig.tick()
    assert [f.stream_id for f in second] == [
        StreamId.PRESSURE, StreamId.CTRL, StreamId.IMU]

    drained = sub.drain()
    assert [f.stream_id for f in drained] == [
        StreamId.PRESSURE, StreamId.CTRL,
        StreamId.PRESSURE, StreamId.CTRL, StreamId.IMU]
    pressures = [f for f in drained if f.stream_id is StreamId.PRESSURE]
    assert [f.seq for f in pressures] == [0, 1]


def test_static_hold_drives_pressure_toward_target():
    rig = DemoRig()
    rig.handle_command({"id": "c1", "action": "start", "task": "static_hold"})
    last = None
    for _ in range(600):  # 3 s of control-rate ticks
        last = rig.tick()
    assert rig.phase.state == "running"
    pressure_frame = last[0]
    assert pressure_frame.payload.setpoint_kpa == pytest.approx(
        rig.plant.p_max, abs=1e-3)
    assert pressure_frame.payload.pressure_kpa > 60.0
    assert rig._theta > 80.0


def test_trial_start_emits_event_to_listeners():
    rig = DemoRig()
    q = rig.attach()
    rig.handle_command({"id": "c1", "action": "start"})
    msg = q.get_nowait()
    assert msg["kind"] == "telemetry"
    assert msg["body"]["stream"] == "EVENT"
    assert msg["body"]["payload"]["kind"] == "trial_start"
    rig.detach(q)
    rig.handle_command({"id": "c2", "action": "stop"})
    assert q.empty()  # detached listeners receive nothing further


# ---------------------------------------------------------------------------
# WebSocket transport (in-process)


def _next_reply(ws) -> dict:
    # Commands may broadcast telemetry (trial events) ahead of the echo.
    while True:
        msg = json.loads(ws.receive_text())
        if msg["kind"] != "telemetry":
            return msg


def test_websocket_roundtrip():
    from fastapi.testclient import TestClient

    rig = DemoRig()
    app = build_app(rig)
    with TestClient(app) as client:
        status = client.get("/").json()
        assert status["service"] == "exobench"
        assert "trial_cmd" in status["console_kinds"]

        with client.websocket_connect("/ws") as ws:
            ws.send_text(json.dumps({
                "kind": "trial_cmd",
                "body": {"id": "w1", "action": "start"}}))
            reply = _next_reply(ws)
            assert reply["kind"] == "trial_state"
            assert reply["body"]["id"] == "w1"
            assert reply["body"]["state"] == "running"

            ws.send_text("this is not json")
            err = _next_reply(ws)
            assert err["kind"] == "trial_state"
            assert err["body"]["error"].startswith("not JSON")

            ws.send_text(json.dumps({"kind": "telemetry",
                                     "body": {"id": "w2"}}))
            refused = _next_reply(ws)
            assert refused["body"]["error"] == "clients cannot send 'telemetry'"

            ws.send_text(json.dumps({
                "kind": "direction_submit",
                "body": {"id": "w3",
                         "payload": {"participant": "p01", "version": "v2",
                                     "direction": "oblique"}}}))
            sub = _next_reply(ws)
            assert sub["kind"] == "direction_submit"
            assert sub["body"] == {"id": "w3", "accepted": True}
