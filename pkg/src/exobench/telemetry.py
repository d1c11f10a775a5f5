"""Typed telemetry frames: wire format, bounded-queue bus, record/replay.

Wire layout (little-endian throughout)::

    magic 0xE5 0x0B | stream u8 | seq u32 | timestamp_us u64 | payload_len u16
    | payload | crc32(all preceding bytes) u32

CRC is the IEEE polynomial as computed by zlib.crc32.  Float payload fields
are stored at f32 precision in memory as well as on the wire, so
decode(encode(frame)) == frame holds for every valid frame.

Logs (extension .exolog) are the same frames concatenated; damaged entries
are skipped on read and counted, never propagated.
"""

from __future__ import annotations

import json
import struct
import threading
import time
import zlib
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Union

MAGIC = b"\xe5\x0b"
_HEADER = struct.Struct("<BIQH")  # stream, seq, timestamp_us, payload_len
_CRC = struct.Struct("<I")
HEADER_LEN = 2 + _HEADER.size
MAX_PAYLOAD = 0xFFFF


class StreamId(IntEnum):
    IMU = 1
    PRESSURE = 2
    EMG = 3
    CTRL = 4
    EVENT = 5


class FrameError(ValueError):
    """Base for encode/decode failures."""


class PayloadTooLarge(FrameError):
    pass


class BadMagic(FrameError):
    pass


class BadCrc(FrameError):
    pass


class Truncated(FrameError):
    pass


class UnknownStream(FrameError):
    pass


class BadPayload(FrameError):
    """Payload bytes do not match the stream's fixed layout."""


def _f32(x: float) -> float:
    """Round a float to its IEEE-754 single-precision value."""
    return struct.unpack("<f", struct.pack("<f", x))[0]


_QUAT = struct.Struct("<4f")
_IMU_TAIL = struct.Struct("<3B")


@dataclass(frozen=True)
class ImuPayload:
    """Absolute orientations of torso, upper arm, and forearm plus calib bytes."""

    q_torso: tuple[float, float, float, float]
    q_upper_arm: tuple[float, float, float, float]
    q_forearm: tuple[float, float, float, float]
    calib: tuple[int, int, int] = (3, 3, 3)

    def __post_init__(self):
        for name in ("q_torso", "q_upper_arm", "q_forearm"):
            q = tuple(_f32(v) for v in getattr(self, name))
            if len(q) != 4:
                raise ValueError("quaternions have four components")
            norm = sum(v * v for v in q) ** 0.5
            if abs(norm - 1.0) > 1e-3:
                raise ValueError(f"{name} norm {norm:.6f} outside 1 +/- 1e-3")
            object.__setattr__(self, name, q)
        object.__setattr__(self, "calib", tuple(int(c) & 0xFF for c in self.calib))

    def pack(self) -> bytes:
        return (
            _QUAT.pack(*self.q_torso)
            + _QUAT.pack(*self.q_upper_arm)
            + _QUAT.pack(*self.q_forearm)
            + _IMU_TAIL.pack(*self.calib)
        )

    @classmethod
    def unpack(cls, data: bytes) -> "ImuPayload":
        if len(data) != 3 * _QUAT.size + _IMU_TAIL.size:
            raise BadPayload(f"IMU payload is {len(data)} bytes")
        qs = [_QUAT.unpack_from(data, i * _QUAT.size) for i in range(3)]
        calib = _IMU_TAIL.unpack_from(data, 3 * _QUAT.size)
        return cls(qs[0], qs[1], qs[2], calib)


_PRESSURE = struct.Struct("<2f")


@dataclass(frozen=True)
class PressurePayload:
    pressure_kpa: float
    setpoint_kpa: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pressure_kpa", _f32(self.pressure_kpa))
        object.__setattr__(self, "setpoint_kpa", _f32(self.setpoint_kpa))

    def pack(self) -> bytes:
        return _PRESSURE.pack(self.pressure_kpa, self.setpoint_kpa)

    @classmethod
    def unpack(cls, data: bytes) -> "PressurePayload":
        if len(data) != _PRESSURE.size:
            raise BadPayload(f"pressure payload is {len(data)} bytes")
        return cls(*_PRESSURE.unpack(data))


EMG_BLOCK = 20  # samples per channel per frame: 10 ms at 2 kHz
EMG_CHANNELS = ("AD", "MD", "PD")
_EMG = struct.Struct(f"<{3 * EMG_BLOCK}f")


@dataclass(frozen=True)
class EmgPayload:
    """One 10 ms block of the three deltoid channels, channel-major, mV."""

    ad: tuple[float, ...]
    md: tuple[float, ...]
    pd: tuple[float, ...]

    def __post_init__(self):
        for name in ("ad", "md", "pd"):
            vals = tuple(_f32(v) for v in getattr(self, name))
            if len(vals) != EMG_BLOCK:
                raise ValueError(f"channel {name} must carry {EMG_BLOCK} samples")
            object.__setattr__(self, name, vals)

    def pack(self) -> bytes:
        return _EMG.pack(*self.ad, *self.md, *self.pd)

    @classmethod
    def unpack(cls, data: bytes) -> "EmgPayload":
        if len(data) != _EMG.size:
            raise BadPayload(f"EMG payload is {len(data)} bytes")
        vals = _EMG.unpack(data)
        return cls(vals[:EMG_BLOCK], vals[EMG_BLOCK:2 * EMG_BLOCK], vals[2 * EMG_BLOCK:])


_CTRL = struct.Struct("<2B")


@dataclass(frozen=True)
class CtrlPayload:
    """Controller tick: mode code (0 hold, 1 inflate, 2 vent) and valve bits."""

    mode: int
    valve_bits: int

    def __post_init__(self):
        object.__setattr__(self, "mode", int(self.mode) & 0xFF)
        object.__setattr__(self, "valve_bits", int(self.valve_bits) & 0xFF)

    def pack(self) -> bytes:
        return _CTRL.pack(self.mode, self.valve_bits)

    @classmethod
    def unpack(cls, data: bytes) -> "CtrlPayload":
        if len(data) != _CTRL.size:
            raise BadPayload(f"CTRL payload is {len(data)} bytes")
        return cls(*_CTRL.unpack(data))


@dataclass(frozen=True)
class EventPayload:
    """Trial/protocol marker, JSON on the wire: {"kind": ..., "data": {...}}."""

    kind: str
    data: dict = field(default_factory=dict)

    def pack(self) -> bytes:
        return json.dumps(
            {"kind": self.kind, "data": self.data}, sort_keys=True, separators=(",", ":")
        ).encode()

    @classmethod
    def unpack(cls, data: bytes) -> "EventPayload":
        try:
            obj = json.loads(data.decode())
            return cls(kind=obj["kind"], data=obj.get("data", {}))
        except (ValueError, KeyError) as exc:
            raise BadPayload(f"event payload is not valid JSON: {exc}") from exc


Payload = Union[ImuPayload, PressurePayload, EmgPayload, CtrlPayload, EventPayload, bytes]

_PAYLOAD_TYPES = {
    StreamId.IMU: ImuPayload,
    StreamId.PRESSURE: PressurePayload,
    StreamId.EMG: EmgPayload,
    StreamId.CTRL: CtrlPayload,
    StreamId.EVENT: EventPayload,
}


@dataclass(frozen=True)
class TelemetryFrame:
    stream_id: StreamId
    seq: int
    timestamp_us: int
    payload: Payload

    def __post_init__(self):
        if not 0 <= self.seq <= 0xFFFFFFFF:
            raise ValueError("seq outside u32 range")
        if not 0 <= self.timestamp_us <= 0xFFFFFFFFFFFFFFFF:
            raise ValueError("timestamp_us outside u64 range")


def encode_frame(frame: TelemetryFrame) -> bytes:
    payload = frame.payload if isinstance(frame.payload, bytes) else frame.payload.pack()
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    head = MAGIC + _HEADER.pack(
        int(frame.stream_id), frame.seq, frame.timestamp_us, len(payload)
    )
    body = head + payload
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def decode_frame(data: bytes) -> TelemetryFrame:
    """Decode exactly one frame; magic, length, CRC, and stream are all checked."""
    if len(data) >= 2 and data[:2] != MAGIC:
        raise BadMagic(f"bad magic {data[:2]!r}")
    if len(data) < HEADER_LEN:
        raise Truncated(f"{len(data)} bytes is shorter than the header")
    stream, seq, t_us, plen = _HEADER.unpack_from(data, 2)
    total = HEADER_LEN + plen + _CRC.size
    if len(data) < total:
        raise Truncated(f"frame needs {total} bytes, got {len(data)}")
    body = data[: HEADER_LEN + plen]
    (crc_stored,) = _CRC.unpack_from(data, HEADER_LEN + plen)
    if zlib.crc32(body) & 0xFFFFFFFF != crc_stored:
        raise BadCrc("crc mismatch")
    try:
        stream_id = StreamId(stream)
    except ValueError:
        raise UnknownStream(f"stream id {stream}") from None
    payload = _PAYLOAD_TYPES[stream_id].unpack(data[HEADER_LEN: HEADER_LEN + plen])
    return TelemetryFrame(stream_id=stream_id, seq=seq, timestamp_us=t_us, payload=payload)


def frame_length(data: bytes, offset: int = 0) -> int | None:
    """Total byte length of the frame starting at offset, or None if the header is incomplete."""
    if len(data) - offset < HEADER_LEN:
        return None
    (plen,) = struct.unpack_from("<H", data, offset + 2 + 1 + 4 + 8)
    return HEADER_LEN + plen + _CRC.size


def iter_frames(data: bytes) -> Iterator[tuple[TelemetryFrame | None, int]]:
    """Walk a byte buffer, yielding (frame, offset) or (None, offset) per damaged entry.

    Damaged entries (bad CRC, bad payload) are skipped by their declared
    length; garbage without a magic is skipped by resyncing on the next
    magic occurrence and reported as a single damaged entry.
    """
    offset = 0
    n = len(data)
    while offset < n:
        if data[offset: offset + 2] != MAGIC:
            nxt = data.find(MAGIC, offset + 1)
            yield None, offset
            if nxt == -1:
                return
            offset = nxt
            continue
        total = frame_length(data, offset)
        if total is None or offset + total > n:
            yield None, offset  # truncated tail
            return
        try:
            yield decode_frame(data[offset: offset + total]), offset
        except FrameError:
            yield None, offset
        offset += total


class LogWriter:
    """Append-only .exolog writer; an ordinary bus subscriber can drive it."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "ab")

    def write(self, frame: TelemetryFrame) -> None:
        self._fh.write(encode_frame(frame))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_log(path: str | Path) -> tuple[list[TelemetryFrame], int]:
    """Read every intact frame from a log; returns (frames, damaged_count)."""
    data = Path(path).read_bytes()
    frames: list[TelemetryFrame] = []
    damaged = 0
    for frame, _ in iter_frames(data):
        if frame is None:
            damaged += 1
        else:
            frames.append(frame)
    return frames, damaged


def replay_log(
    path: str | Path, paced: bool = False, speed: float = 1.0
) -> Iterator[TelemetryFrame]:
    """Yield logged frames in order; paced mode sleeps out the original timestamp gaps."""
    frames, _ = read_log(path)
    prev_us = None
    for frame in frames:
        if paced and prev_us is not None and frame.timestamp_us > prev_us:
            time.sleep((frame.timestamp_us - prev_us) / 1e6 / speed)
        prev_us = frame.timestamp_us
        yield frame


class StreamSequencer:
    """Per-stream seq counter so producers emit strictly increasing numbers."""

    def __init__(self, stream_id: StreamId):
        self.stream_id = stream_id
        self._seq = 0

    def frame(self, timestamp_us: int, payload: Payload) -> TelemetryFrame:
        f = TelemetryFrame(self.stream_id, self._seq, timestamp_us, payload)
        self._seq = (self._seq + 1) & 0xFFFFFFFF
        return f


class Subscription:
    """Bounded FIFO fed by the bus; overflow drops the oldest frame."""

    def __init__(self, streams: set[StreamId] | None, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.streams = streams
        self.capacity = capacity
        self.drops = 0
        self._q: deque[TelemetryFrame] = deque()
        self._lock = threading.Lock()

    def _offer(self, frame: TelemetryFrame) -> None:
        with self._lock:
            if len(self._q) >= self.capacity:
                self._q.popleft()
                self.drops += 1
            self._q.append(frame)

    def pop(self) -> TelemetryFrame | None:
        with self._lock:
            return self._q.popleft() if self._q else None

    def drain(self) -> list[TelemetryFrame]:
        with self._lock:
            out = list(self._q)
            self._q.clear()
        return out

    def __len__(self) -> int:
        return len(self._q)


class TelemetryBus:
    """One producer per stream, any number of non-blocking subscribers."""

    def __init__(self):
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()

    def subscribe(
        self, streams: Iterable[StreamId] | None = None, capacity: int = 256
    ) -> Subscription:
        sub = Subscription(set(streams) if streams is not None else None, capacity)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def publish(self, frame: TelemetryFrame) -> None:
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            if sub.streams is None or frame.stream_id in sub.streams:
                sub._offer(frame)


def count_seq_gaps(frames: Iterable[TelemetryFrame]) -> dict[StreamId, int]:
    """Exact per-stream drop counts from seq discontinuities."""
    last: dict[StreamId, int] = {}
    gaps: dict[StreamId, int] = {}
    for f in frames:
        if f.stream_id in last:
            gaps[f.stream_id] = gaps.get(f.stream_id, 0) + max(
                0, f.seq - last[f.stream_id] - 1
            )
        else:
            gaps.setdefault(f.stream_id, 0)
        last[f.stream_id] = f.seq
    return gaps


def frame_to_json(frame: TelemetryFrame) -> dict:
    """Console-transport mirror: {stream, seq, t_us, payload} with plain numbers."""
    p = frame.payload
    if isinstance(p, ImuPayload):
        body = {
            "q_torso": list(p.q_torso),
            "q_upper_arm": list(p.q_upper_arm),
            "q_forearm": list(p.q_forearm),
            "calib": list(p.calib),
        }
    elif isinstance(p, PressurePayload):
        body = {"pressure_kpa": p.pressure_kpa, "setpoint_kpa": p.setpoint_kpa}
    elif isinstance(p, EmgPayload):
        body = {"ad": list(p.ad), "md": list(p.md), "pd": list(p.pd)}
    elif isinstance(p, CtrlPayload):
        body = {"mode": p.mode, "valve_bits": p.valve_bits}
    elif isinstance(p, EventPayload):
        body = {"kind": p.kind, "data": p.data}
    else:
        body = {"raw": p.hex() if isinstance(p, bytes) else str(p)}
    return {
        "stream": frame.stream_id.name,
        "seq": frame.seq,
        "t_us": frame.timestamp_us,
        "payload": body,
    }
