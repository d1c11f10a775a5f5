"""Deterministic plant model: pneumatic chamber plus a 1-DOF arm.

Dynamics:

    pressure     first-order lag toward the supply (fill) or toward zero
                 (vent), integrated exactly over each step and clamped to
                 [0, p_max]
    arm          I * theta_dd = tau_muscle + tau_assist - tau_gravity - b * theta_d
                 semi-implicit Euler at the physics tick (1 kHz default),
                 joint limits at 0 and 180 deg with velocity zeroed

State is held in degrees at the interface; the integrator works in
radians.  Everything here is a pure function of (state, input, params), so
identical inputs give bit-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .controller import (
    MODE_CODES,
    HysteresisController,
    ValveCommand,
    bang_bang_tick,
    pressure_for_angle,
)

GRAVITY = 9.81
PHYSICS_DT = 1e-3          # 1 kHz physics tick
CONTROL_SUBSAMPLE = 5      # controller runs every 5th tick (200 Hz)
MAX_ARM_DT = 2e-3          # stability bound for the explicit integrator


class NonFiniteState(ValueError):
    """A state variable or input left the finite range."""


class Plane(Enum):
    """Elevation plane of the 1-DOF arm."""

    CORONAL = "abduction"   # shoulder abduction
    SAGITTAL = "flexion"    # shoulder flexion


def _assist_weight_sin_offset(theta_deg: float) -> float:
    # sin(theta + 20 deg), clamped at zero; peaks at 1.0 near 70 deg and is
    # nonzero at theta = 0 (the chamber presses into the armpit from the start)
    return max(math.sin(math.radians(theta_deg + 20.0)), 0.0)


def _assist_weight_uniform(theta_deg: float) -> float:
    return 1.0


ASSIST_PROFILES: dict[str, Callable[[float], float]] = {
    "sin_offset_20": _assist_weight_sin_offset,
    "uniform": _assist_weight_uniform,
}


@dataclass(frozen=True, slots=True)
class PlantParams:
    """Physical parameters of the actuator/arm pair.

    Defaults are representative adult anthropometrics; load_mass is set per
    participant (2.5% of body mass for the loaded tasks).  assist_gain is
    chosen so that full inflation approximately balances the loaded arm at
    90 deg elevation.
    """

    arm_mass: float = 3.5          # kg
    arm_com_dist: float = 0.3      # m, shoulder to arm centre of mass
    hand_dist: float = 0.6         # m, shoulder to hand-held load
    load_mass: float = 0.0         # kg, >= 0
    inertia: float = 0.60          # kg m^2 about the shoulder
    viscous_damping: float = 1.5   # N m s / rad
    fill_tau: float = 0.8          # s
    vent_tau: float = 1.2          # s
    supply_pressure: float = 120.0 # kPa
    assist_gain: float = 0.30      # N m / kPa at the profile peak
    assist_profile: str = "sin_offset_20"
    p_max: float = 70.0            # kPa

    def __post_init__(self):
        for name in ("arm_mass", "arm_com_dist", "hand_dist", "inertia",
                     "viscous_damping", "fill_tau", "vent_tau",
                     "supply_pressure", "assist_gain", "p_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.load_mass < 0:
            raise ValueError("load_mass must be >= 0")
        if self.assist_profile not in ASSIST_PROFILES:
            raise ValueError(f"unknown assist profile {self.assist_profile!r}")


@dataclass(frozen=True, slots=True)
class ActuatorState:
    pressure: float = 0.0                       # gauge kPa
    valve_cmd: ValveCommand = ValveCommand()    # last applied command


@dataclass(frozen=True, slots=True)
class ArmPlantState:
    theta: float = 0.0            # deg, 0 = arm hanging
    omega: float = 0.0            # deg/s
    plane: Plane = Plane.CORONAL


def step_pneumatics(
    state: ActuatorState, cmd: ValveCommand, dt: float, params: PlantParams
) -> ActuatorState:
    """Advance chamber pressure by dt under the given valve command.

    Fill follows a first-order lag toward supply_pressure (time constant
    fill_tau); vent and exhaust decay toward zero (vent_tau); all-closed
    holds.  The exact exponential solution is used, so the update composes
    across arbitrary step splits.  Result clamped to [0, p_max].
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not math.isfinite(state.pressure) or not math.isfinite(dt):
        raise NonFiniteState("non-finite pneumatic state")

    p = state.pressure
    if cmd.vent_open or cmd.exhaust_open:
        p = p * math.exp(-dt / params.vent_tau)
    elif cmd.inflate_open:
        target = params.supply_pressure
        p = target + (p - target) * math.exp(-dt / params.fill_tau)
    # all closed: unchanged

    p = min(max(p, 0.0), params.p_max)
    return ActuatorState(pressure=p, valve_cmd=cmd)


def gravity_torque(theta_deg: float, params: PlantParams) -> float:
    """Gravity load about the shoulder at the given elevation, N m."""
    lever = (
        params.arm_mass * GRAVITY * params.arm_com_dist
        + params.load_mass * GRAVITY * params.hand_dist
    )
    return lever * math.sin(math.radians(theta_deg))


def assist_torque(pressure_kpa: float, theta_deg: float, params: PlantParams) -> float:
    """Assistive torque: linear in pressure, shaped by the angle profile."""
    weight = ASSIST_PROFILES[params.assist_profile](theta_deg)
    return params.assist_gain * pressure_kpa * weight


def step_arm(
    state: ArmPlantState,
    tau_assist: float,
    tau_muscle: float,
    params: PlantParams,
    dt: float,
) -> ArmPlantState:
    """One semi-implicit Euler step of the arm dynamics.

    dt must not exceed 2 ms (integrator stability bound).  Joint limits at
    0 and 180 deg clamp the angle and zero the velocity.
    """
    if dt <= 0 or dt > MAX_ARM_DT:
        raise ValueError(f"dt must be in (0, {MAX_ARM_DT}] s")
    if not (math.isfinite(state.theta) and math.isfinite(state.omega)
            and math.isfinite(tau_assist) and math.isfinite(tau_muscle)):
        raise NonFiniteState("non-finite arm state or torque")

    omega_rad = math.radians(state.omega)
    tau_net = (
        tau_muscle
        + tau_assist
        - gravity_torque(state.theta, params)
        - params.viscous_damping * omega_rad
    )
    omega_rad += (tau_net / params.inertia) * dt
    theta = state.theta + math.degrees(omega_rad) * dt

    if theta <= 0.0:
        theta = 0.0
        omega_rad = max(omega_rad, 0.0)
    elif theta >= 180.0:
        theta = 180.0
        omega_rad = min(omega_rad, 0.0)

    return ArmPlantState(theta=theta, omega=math.degrees(omega_rad), plane=state.plane)


@dataclass(frozen=True, slots=True)
class HumanEffortModel:
    """PD effort toward a target angle with linear capacity depletion.

    Capacity in [0, 1] scales the available torque ceiling; it depletes in
    proportion to the normalized torque demand and recovers toward 1 at
    recovery_rate when demand is light.  This is the minimal model that
    yields longer endurance and lower muscle torque under assistance.
    """

    kp: float = 2.0            # N m / deg
    kd: float = 0.3            # N m s / deg
    tau_max: float = 40.0      # N m
    fatigue_rate: float = 0.02 # 1/s at full normalized demand
    recovery_rate: float = 0.0 # 1/s toward full capacity
    capacity: float = 1.0

    def __post_init__(self):
        if self.tau_max <= 0:
            raise ValueError("tau_max must be positive")
        if not 0.0 <= self.capacity <= 1.0:
            raise ValueError("capacity must lie in [0, 1]")


@dataclass
class HoldResult:
    """Traces and outcome of a simulated static hold.

    Series are sampled at sample_rate_hz (100 Hz); pressure/mode at
    ctrl_rate_hz (200 Hz).
    """

    endurance: float
    stop_reason: str                     # "angle_drop" or "time_cap"
    times: np.ndarray                    # s, 100 Hz
    theta_series: np.ndarray             # deg
    muscle_torque_series: np.ndarray     # N m
    capacity_series: np.ndarray
    ctrl_times: np.ndarray               # s, 200 Hz
    pressure_series: np.ndarray          # kPa
    mode_series: np.ndarray              # controller mode wire codes (u8)
    sample_rate_hz: float = 100.0
    ctrl_rate_hz: float = 200.0
    setpoint_kpa: float = 0.0


def pressure_setpoint_for_hold(target_deg: float, params: PlantParams) -> float:
    """Static angle-to-pressure map, scaled to this plant's pressure ceiling."""
    return pressure_for_angle(target_deg, params.p_max)


def simulate_human_hold(
    target: float,
    assist_on: bool,
    model: HumanEffortModel,
    params: PlantParams,
    cap: float = 600.0,
    drop_deg: float = 10.0,
    debounce: float = 0.5,
    band: float = 2.0,
) -> HoldResult:
    """Simulate a loaded static hold at the target elevation.

    The virtual participant applies gravity-compensating feedforward plus
    PD correction, saturated at tau_max * capacity.  The trial ends when
    the elevation stays more than drop_deg below target for debounce
    seconds, or at the time cap.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    if not 0.0 < target < 180.0:
        raise ValueError("target must lie in (0, 180) deg")

    dt = PHYSICS_DT
    n_ticks = int(round(cap / dt))
    setpoint = pressure_setpoint_for_hold(target, params) if assist_on else 0.0
    ctrl = HysteresisController(setpoint=setpoint, band=band)

    act = ActuatorState()
    arm = ArmPlantState(theta=target, omega=0.0)
    capacity = model.capacity
    threshold = target - drop_deg

    times, thetas, torques, capacities = [], [], [], []
    ctrl_times, pressures, modes = [], [], []
    cmd = ValveCommand()

    stop_reason = "time_cap"
    endurance = cap
    below_since = None

    for k in range(n_ticks):
        t = k * dt
        if k % CONTROL_SUBSAMPLE == 0:
            ctrl, cmd = bang_bang_tick(ctrl, act.pressure)
            ctrl_times.append(t)
            pressures.append(act.pressure)
            modes.append(MODE_CODES[ctrl.mode])
        act = step_pneumatics(act, cmd, dt, params)

        tau_a = assist_torque(act.pressure, arm.theta, params)
        tau_ff = gravity_torque(arm.theta, params) - tau_a
        tau_demand = tau_ff + model.kp * (target - arm.theta) - model.kd * arm.omega
        tau_m = min(max(tau_demand, 0.0), model.tau_max * capacity)

        capacity += dt * (
            -model.fatigue_rate * (tau_m / model.tau_max)
            + model.recovery_rate * (1.0 - capacity)
        )
        capacity = min(max(capacity, 0.0), 1.0)

        arm = step_arm(arm, tau_a, tau_m, params, dt)

        if k % 10 == 0:
            times.append(t)
            thetas.append(arm.theta)
            torques.append(tau_m)
            capacities.append(capacity)

        if arm.theta < threshold:
            if below_since is None:
                below_since = t
            elif t - below_since >= debounce:
                stop_reason = "angle_drop"
                endurance = below_since + debounce
                break
        else:
            below_since = None

    return HoldResult(
        endurance=endurance,
        stop_reason=stop_reason,
        times=np.asarray(times),
        theta_series=np.asarray(thetas),
        muscle_torque_series=np.asarray(torques),
        capacity_series=np.asarray(capacities),
        ctrl_times=np.asarray(ctrl_times),
        pressure_series=np.asarray(pressures),
        mode_series=np.asarray(modes, dtype=np.uint8),
        setpoint_kpa=setpoint,
    )
