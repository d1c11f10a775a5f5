"""Closed-loop bang-bang pressure regulation with hysteresis.

The regulator is a three-mode machine (Inflating / Venting / Holding)
ticked at 200 Hz on pressure samples.  It leaves Holding only when the
measurement exits the hysteresis band around the setpoint, and returns to
Holding once the setpoint itself is crossed, so there is no re-triggering
inside the band.  All functions here are pure: they take state and input
and return new state plus the valve command, which makes them safe to call
from any thread and trivially replayable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

CONTROL_RATE_HZ = 200.0


class NonFiniteInput(ValueError):
    """A pressure sample was NaN or infinite."""


class OverpressureFault(RuntimeError):
    """Measured pressure exceeded p_max + margin; exhaust override issued."""

    def __init__(self, pressure_kpa: float, limit_kpa: float):
        super().__init__(
            f"overpressure: {pressure_kpa:.2f} kPa exceeds limit {limit_kpa:.2f} kPa"
        )
        self.pressure_kpa = pressure_kpa
        self.limit_kpa = limit_kpa


class Mode(Enum):
    INFLATING = "inflating"
    VENTING = "venting"
    HOLDING = "holding"


@dataclass(frozen=True, slots=True)
class ValveCommand:
    """Logical valve/pump state.

    The physical unit has four solenoid valves plus a pump-exhaust valve;
    they are collapsed here to one inflate path, one vent path, and the
    exhaust.  Inflate and vent may never be open together, and the exhaust
    implies the pump is off.
    """

    inflate_open: bool = False
    vent_open: bool = False
    pump_on: bool = False
    exhaust_open: bool = False

    def __post_init__(self):
        if self.inflate_open and self.vent_open:
            raise ValueError("inflate and vent paths may not be open together")
        if self.exhaust_open and self.pump_on:
            raise ValueError("exhaust open implies pump off")

    def bits(self) -> int:
        """Pack to the wire bit layout (bit0 inflate, 1 vent, 2 pump, 3 exhaust)."""
        return (
            (1 if self.inflate_open else 0)
            | (2 if self.vent_open else 0)
            | (4 if self.pump_on else 0)
            | (8 if self.exhaust_open else 0)
        )

    @classmethod
    def from_bits(cls, bits: int) -> "ValveCommand":
        return cls(
            inflate_open=bool(bits & 1),
            vent_open=bool(bits & 2),
            pump_on=bool(bits & 4),
            exhaust_open=bool(bits & 8),
        )


HOLD_CMD = ValveCommand()
INFLATE_CMD = ValveCommand(inflate_open=True, pump_on=True)
VENT_CMD = ValveCommand(vent_open=True)
EXHAUST_CMD = ValveCommand(exhaust_open=True)

MODE_CODES = {Mode.INFLATING: 1, Mode.VENTING: 2, Mode.HOLDING: 0}
CODE_MODES = {v: k for k, v in MODE_CODES.items()}


@dataclass(frozen=True, slots=True)
class HysteresisController:
    """Bang-bang regulator state: setpoint, half-band width, and mode."""

    setpoint: float = 0.0
    band: float = 2.0
    mode: Mode = Mode.HOLDING
    tick_rate: float = CONTROL_RATE_HZ

    def __post_init__(self):
        if self.band <= 0:
            raise ValueError("hysteresis band must be positive")

    def with_setpoint(self, setpoint: float) -> "HysteresisController":
        return replace(self, setpoint=setpoint)


_MODE_COMMANDS = {
    Mode.INFLATING: INFLATE_CMD,
    Mode.VENTING: VENT_CMD,
    Mode.HOLDING: HOLD_CMD,
}


def command_for_mode(mode: Mode) -> ValveCommand:
    """Valve command a well-behaved controller emits while in `mode`."""
    return _MODE_COMMANDS[mode]


def bang_bang_tick(
    ctrl: HysteresisController, p_meas: float
) -> tuple[HysteresisController, ValveCommand]:
    """Advance the mode machine one tick and emit the valve command.

    Transitions use strict inequalities out of Holding (band edges hold)
    and inclusive inequalities back into Holding at the setpoint.
    """
    if not math.isfinite(p_meas):
        raise NonFiniteInput(f"pressure sample is not finite: {p_meas!r}")

    mode = ctrl.mode
    if mode is Mode.HOLDING:
        if p_meas < ctrl.setpoint - ctrl.band:
            mode = Mode.INFLATING
        elif p_meas > ctrl.setpoint + ctrl.band:
            mode = Mode.VENTING
    elif mode is Mode.INFLATING:
        if p_meas >= ctrl.setpoint:
            mode = Mode.HOLDING
    elif mode is Mode.VENTING:
        if p_meas <= ctrl.setpoint:
            mode = Mode.HOLDING

    new_ctrl = ctrl if mode is ctrl.mode else replace(ctrl, mode=mode)
    return new_ctrl, _MODE_COMMANDS[mode]


@dataclass(frozen=True, slots=True)
class PressureLimits:
    p_max: float = 70.0
    margin: float = 3.0

    def __post_init__(self):
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")


def safety_clamp(
    p_meas: float, limits: PressureLimits
) -> tuple[ValveCommand, OverpressureFault] | None:
    """Overpressure guard checked on every sample.

    Returns the exhaust override and the fault to raise/log when the
    measurement exceeds p_max + margin, None otherwise.  The boundary is
    inclusive: p_meas == p_max + margin does not fault.
    """
    threshold = limits.p_max + limits.margin
    if p_meas > threshold:
        return EXHAUST_CMD, OverpressureFault(p_meas, threshold)
    return None


@dataclass(frozen=True)
class AngleTrajectory:
    """Piecewise-linear target-angle profile, phases of (duration s, start deg, end deg).

    Default is the dynamic-lifting profile: 7 s raise to 90 deg, 2 s hold,
    7 s lower back to rest.
    """

    phases: tuple[tuple[float, float, float], ...] = (
        (7.0, 0.0, 90.0),
        (2.0, 90.0, 90.0),
        (7.0, 90.0, 0.0),
    )

    def __post_init__(self):
        if not self.phases:
            raise ValueError("trajectory needs at least one phase")
        object.__setattr__(self, "phases", tuple(tuple(p) for p in self.phases))
        for dur, _, _ in self.phases:
            if dur <= 0:
                raise ValueError("phase durations must be positive")

    @property
    def duration(self) -> float:
        return sum(d for d, _, _ in self.phases)


def trajectory_setpoint(traj: AngleTrajectory, t: float) -> float:
    """Target angle at time t; holds the final value past the end."""
    if t < 0:
        raise ValueError("t must be non-negative")
    for dur, start, end in traj.phases:
        if t <= dur:
            return start + (end - start) * (t / dur)
        t -= dur
    return traj.phases[-1][2]


def pressure_for_angle(theta_deg: float, p_max_kpa: float = 70.0) -> float:
    """Static angle-to-pressure setpoint map: linear from 0 deg -> 0 kPa to
    90 deg -> p_max, clamped at both ends."""
    if not math.isfinite(theta_deg):
        raise NonFiniteInput(f"target angle {theta_deg!r}")
    return max(0.0, min(1.0, theta_deg / 90.0)) * p_max_kpa
