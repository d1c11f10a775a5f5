"""Closed-loop glue: plant + regulator + overpressure latch.

One instance advances a single actuator in lockstep with its controller.
The physics run at 1 kHz and the regulator at 200 Hz (every 5th tick).  An
overpressure fault latches the exhaust override until reset_fault(); the
pressure then decays through the vent dynamics regardless of setpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .controller import (
    EXHAUST_CMD,
    HysteresisController,
    OverpressureFault,
    PressureLimits,
    ValveCommand,
    bang_bang_tick,
    safety_clamp,
)
from .plant import (
    CONTROL_SUBSAMPLE,
    PHYSICS_DT,
    ActuatorState,
    PlantParams,
    step_pneumatics,
)


@dataclass
class PressureLoop:
    params: PlantParams = field(default_factory=PlantParams)
    ctrl: HysteresisController = field(default_factory=HysteresisController)
    limits: PressureLimits = field(default_factory=PressureLimits)
    state: ActuatorState = field(default_factory=ActuatorState)
    fault: OverpressureFault | None = None
    _cmd: ValveCommand = field(default_factory=ValveCommand)
    _tick: int = 0

    @property
    def pressure(self) -> float:
        return self.state.pressure

    @property
    def command(self) -> ValveCommand:
        return self._cmd

    def set_setpoint(self, setpoint_kpa: float) -> None:
        self.ctrl = self.ctrl.with_setpoint(setpoint_kpa)

    def reset_fault(self) -> None:
        self.fault = None

    def tick(self, dt: float = PHYSICS_DT) -> ActuatorState:
        """Advance one physics tick; regulator runs on the 200 Hz subsample."""
        if self._tick % CONTROL_SUBSAMPLE == 0:
            override = safety_clamp(self.state.pressure, self.limits)
            if override is not None:
                self._cmd, self.fault = override
            elif self.fault is not None:
                self._cmd = EXHAUST_CMD  # latched until reset
            else:
                self.ctrl, self._cmd = bang_bang_tick(self.ctrl, self.state.pressure)
        self._tick += 1
        self.state = step_pneumatics(self.state, self._cmd, dt, self.params)
        return self.state

    def run(self, duration_s: float, dt: float = PHYSICS_DT) -> ActuatorState:
        for _ in range(int(round(duration_s / dt))):
            self.tick(dt)
        return self.state
