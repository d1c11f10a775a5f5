import math

import numpy as np
import pytest

from exobench.controller import (
    AngleTrajectory,
    CODE_MODES,
    CONTROL_RATE_HZ,
    EXHAUST_CMD,
    HOLD_CMD,
    INFLATE_CMD,
    HysteresisController,
    MODE_CODES,
    Mode,
    NonFiniteInput,
    OverpressureFault,
    PressureLimits,
    VENT_CMD,
    ValveCommand,
    bang_bang_tick,
    command_for_mode,
    pressure_for_angle,
    safety_clamp,
    trajectory_setpoint,
)


# ---------------------------------------------------------------------------
# Valve command invariants and wire bits


def test_valve_bit_layout():
    assert ValveCommand(inflate_open=True).bits() == 1
    assert ValveCommand(vent_open=True).bits() == 2
    assert ValveCommand(pump_on=True).bits() == 4
    assert ValveCommand(exhaust_open=True).bits() == 8
    assert INFLATE_CMD.bits() == 5  # inflate path + pump
    assert VENT_CMD.bits() == 2
    assert HOLD_CMD.bits() == 0
    assert EXHAUST_CMD.bits() == 8


def test_inflate_and_vent_exclusive():
    with pytest.raises(ValueError):
        ValveCommand(inflate_open=True, vent_open=True)


def test_exhaust_implies_pump_off():
    with pytest.raises(ValueError):
        ValveCommand(exhaust_open=True, pump_on=True)


def test_bits_roundtrip_over_valid_combinations():
    for bits in range(16):
        inflate, vent = bool(bits & 1), bool(bits & 2)
        pump, exhaust = bool(bits & 4), bool(bits & 8)
        if (inflate and vent) or (exhaust and pump):
            with pytest.raises(ValueError):
                ValveCommand.from_bits(bits)
        else:
            assert ValveCommand.from_bits(bits).bits() == bits


def test_mode_wire_codes():
    assert MODE_CODES == {Mode.INFLATING: 1, Mode.VENTING: 2, Mode.HOLDING: 0}
    assert all(CODE_MODES[c] is m for m, c in MODE_CODES.items())


def test_command_for_mode():
    assert command_for_mode(Mode.INFLATING) == INFLATE_CMD
    assert command_for_mode(Mode.VENTING) == VENT_CMD
    assert command_for_mode(Mode.HOLDING) == HOLD_CMD


# ---------------------------------------------------------------------------
# Hysteresis transitions


def ctrl(mode=Mode.HOLDING, setpoint=50.0, band=2.0):
    return HysteresisController(setpoint=setpoint, band=band, mode=mode)


def test_holding_band_edges_are_inclusive():
    # strict inequalities leaving Holding: edge samples do not trip
    for p in (48.0, 50.0, 52.0):
        new, cmd = bang_bang_tick(ctrl(), p)
        assert new.mode is Mode.HOLDING
        assert cmd == HOLD_CMD


def test_holding_exits_below_band():
    new, cmd = bang_bang_tick(ctrl(), 47.999)
    assert new.mode is Mode.INFLATING
    assert cmd == INFLATE_CMD


def test_holding_exits_above_band():
    new, cmd = bang_bang_tick(ctrl(), 52.001)
    assert new.mode is Mode.VENTING
    assert cmd == VENT_CMD


def test_inflating_returns_at_setpoint_inclusive():
    stay, _ = bang_bang_tick(ctrl(Mode.INFLATING), 49.999)
    assert stay.mode is Mode.INFLATING
    back, cmd = bang_bang_tick(ctrl(Mode.INFLATING), 50.0)
    assert back.mode is Mode.HOLDING
    assert cmd == HOLD_CMD


def test_venting_returns_at_setpoint_inclusive():
    stay, _ = bang_bang_tick(ctrl(Mode.VENTING), 50.001)
    assert stay.mode is Mode.VENTING
    back, _ = bang_bang_tick(ctrl(Mode.VENTING), 50.0)
    assert back.mode is Mode.HOLDING


def test_no_retrigger_inside_band():
    # wandering inside the dead band never leaves Holding
    c = ctrl()
    for p in (49.0, 51.5, 48.2, 50.0, 51.9):
        c, cmd = bang_bang_tick(c, p)
        assert c.mode is Mode.HOLDING
        assert cmd == HOLD_CMD


def test_tick_rejects_non_finite():
    with pytest.raises(NonFiniteInput):
        bang_bang_tick(ctrl(), float("nan"))
    with pytest.raises(NonFiniteInput):
        bang_bang_tick(ctrl(), float("inf"))


def test_tick_is_pure_and_reuses_state():
    c = ctrl()
    same, _ = bang_bang_tick(c, 50.0)
    assert same is c  # unchanged mode returns the same frozen object


def test_controller_validation_and_defaults():
    assert HysteresisController().tick_rate == CONTROL_RATE_HZ == 200.0
    assert HysteresisController().band == 2.0
    with pytest.raises(ValueError):
        HysteresisController(band=0.0)
    c = ctrl().with_setpoint(30.0)
    assert c.setpoint == 30.0 and c.band == 2.0


def test_random_walk_never_opens_both_paths():
    rng = np.random.default_rng(5)
    c = ctrl()
    for p in rng.uniform(0.0, 120.0, size=20_000):
        c, cmd = bang_bang_tick(c, float(p))
        assert not (cmd.inflate_open and cmd.vent_open)
        assert not (cmd.exhaust_open and cmd.pump_on)


# ---------------------------------------------------------------------------
# Overpressure guard


def test_safety_clamp_boundary_inclusive():
    limits = PressureLimits(p_max=70.0, margin=3.0)
    assert safety_clamp(73.0, limits) is None
    out = safety_clamp(73.0001, limits)
    assert out is not None
    cmd, fault = out
    assert cmd == EXHAUST_CMD
    assert isinstance(fault, OverpressureFault)
    assert fault.pressure_kpa == 73.0001
    assert fault.limit_kpa == 73.0


def test_pressure_limits_validation():
    with pytest.raises(ValueError):
        PressureLimits(p_max=0.0)


# ---------------------------------------------------------------------------
# Trajectory and the angle-to-pressure map


def test_default_trajectory_shape():
    traj = AngleTrajectory()
    assert traj.duration == 16.0
    assert trajectory_setpoint(traj, 0.0) == 0.0
    assert trajectory_setpoint(traj, 3.5) == pytest.approx(45.0)
    assert trajectory_setpoint(traj, 7.0) == pytest.approx(90.0)
    assert trajectory_setpoint(traj, 8.0) == pytest.approx(90.0)
    assert trajectory_setpoint(traj, 12.5) == pytest.approx(45.0)
    assert trajectory_setpoint(traj, 16.0) == pytest.approx(0.0)
    assert trajectory_setpoint(traj, 100.0) == pytest.approx(0.0)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        AngleTrajectory(phases=())
    with pytest.raises(ValueError):
        AngleTrajectory(phases=((0.0, 0.0, 90.0),))
    with pytest.raises(ValueError):
        trajectory_setpoint(AngleTrajectory(), -0.1)


def test_pressure_for_angle_map():
    assert pressure_for_angle(0.0) == 0.0
    assert pressure_for_angle(45.0) == pytest.approx(35.0)
    assert pressure_for_angle(90.0) == 70.0
    assert pressure_for_angle(130.0) == 70.0  # clamped high
    assert pressure_for_angle(-10.0) == 0.0   # clamped low
    assert pressure_for_angle(90.0, p_max_kpa=50.0) == 50.0
    with pytest.raises(NonFiniteInput):
        pressure_for_angle(math.nan)
