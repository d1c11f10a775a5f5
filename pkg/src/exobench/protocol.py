"""Experimental protocol: conditions, randomization plans, trial state machines.

A session is a randomized, per-participant ordered list of trials.  Each
trial runs under a Condition (device version v1/v2/none, power on/off) and
terminates by one of the stop criteria encoded in the state machines below.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .controller import AngleTrajectory, pressure_for_angle, trajectory_setpoint

VERSIONS = ("v1", "v2")
NO_DEVICE = "none"

STATIC_TARGET_DEG = 90.0
STATIC_THRESHOLD_DEG = 80.0
STATIC_CAP_S = 600.0
STATIC_DEBOUNCE_S = 0.5
STATIC_REST_S = 180.0
DYNAMIC_REST_S = 120.0
TRANSPARENCY_REST_S = 0.0
PICK_PLACE_WINDOW_S = 60.0
LOAD_FRACTION = 0.025


class InvalidConfig(ValueError):
    pass


class InvalidMass(ValueError):
    pass


class StreamLost(RuntimeError):
    """Telemetry feed ended while a trial state machine was still running."""


class Task(str, Enum):
    STATIC_HOLD = "static_hold"
    DYNAMIC_LIFT = "dynamic_lift"
    TRANSPARENCY = "transparency"
    PICK_PLACE = "pick_place"
    COMFORT_PROBE = "comfort_probe"
    QUEST = "quest"


class Plane(str, Enum):
    ABDUCTION = "abduction"
    FLEXION = "flexion"
    OBLIQUE = "oblique"
    HORIZONTAL_ADDUCTION = "horizontal_adduction"


class StopReason(str, Enum):
    VOLUNTARY_STOP = "VoluntaryStop"
    ANGLE_DROP = "AngleDrop"
    TIME_CAP = "TimeCap"
    COMPLETED = "Completed"


@dataclass(frozen=True, slots=True)
class Condition:
    """Device version worn (or none) and whether assistance is powered."""

    version: str = NO_DEVICE
    power: str = "off"

    def __post_init__(self):
        if self.version not in (*VERSIONS, NO_DEVICE):
            raise InvalidConfig(f"unknown version {self.version!r}")
        if self.power not in ("on", "off"):
            raise InvalidConfig(f"power must be 'on' or 'off', got {self.power!r}")
        if self.version == NO_DEVICE and self.power == "on":
            raise InvalidConfig("cannot power assistance without a device")

    @property
    def powered(self) -> bool:
        return self.power == "on"

    @property
    def label(self) -> str:
        return self.version if self.version == NO_DEVICE else \
            f"{self.version}_{self.power}"

    @classmethod
    def from_label(cls, label: str) -> "Condition":
        if label == NO_DEVICE:
            return cls(NO_DEVICE, "off")
        version, _, power = label.partition("_")
        return cls(version, power)


@dataclass(frozen=True, slots=True)
class TrialSpec:
    task: Task
    condition: Condition
    plane: Plane | None = None
    reps: int = 1
    rest_s: float = 0.0
    # Trials where the arm weight was externally supported are excluded
    # from effort comparisons downstream.
    arm_weight_supported: bool = False

    def __post_init__(self):
        if self.reps < 1:
            raise InvalidConfig("reps must be >= 1")
        if self.rest_s < 0:
            raise InvalidConfig("rest_s must be >= 0")

    @property
    def trial_id(self) -> str:
        plane = self.plane.value if self.plane else "noplane"
        return f"{self.task.value}-{plane}-{self.condition.label}"


@dataclass(frozen=True)
class TrialRecord:
    spec: TrialSpec
    start_s: float
    stop_s: float
    stop_reason: StopReason
    log_path: str | None = None
    derived_paths: tuple[str, ...] = ()

    @property
    def duration_s(self) -> float:
        return self.stop_s - self.start_s


def compute_load(body_mass_kg: float) -> float:
    """Hand-held load for static trials: a fixed fraction of body mass."""
    if not body_mass_kg > 0:
        raise InvalidMass(f"body mass must be positive, got {body_mass_kg}")
    return LOAD_FRACTION * body_mass_kg


@dataclass(frozen=True)
class ProtocolConfig:
    """Which trials a session contains; make_plan() randomizes their order."""

    versions: tuple[str, ...] = VERSIONS
    static_planes: tuple[Plane, ...] = (Plane.ABDUCTION, Plane.FLEXION)
    dynamic_planes: tuple[Plane, ...] = (Plane.ABDUCTION,)
    dynamic_reps: int = 3
    static_cap_s: float = STATIC_CAP_S
    include_transparency: bool = True
    include_pick_place: bool = True
    include_comfort: bool = True

    def __post_init__(self):
        if not self.versions:
            raise InvalidConfig("at least one device version required")
        for v in self.versions:
            if v not in VERSIONS:
                raise InvalidConfig(f"unknown version {v!r}")
        if self.dynamic_reps < 1:
            raise InvalidConfig("dynamic_reps must be >= 1")
        if self.static_cap_s <= 0:
            raise InvalidConfig("static_cap_s must be positive")


@dataclass(frozen=True)
class RandomizationPlan:
    seed: int
    trials: dict[str, tuple[TrialSpec, ...]]  # participant id -> ordered specs

    def for_participant(self, pid: str) -> tuple[TrialSpec, ...]:
        return self.trials[pid]


def _version_block(version: str, cfg: ProtocolConfig, rng: random.Random
                   ) -> list[TrialSpec]:
    """All trials done while wearing one device version, in protocol order
    (comfort probe, statics, dynamics, transparency, pick-place, survey)."""
    trials: list[TrialSpec] = []
    if cfg.include_comfort:
        trials.append(TrialSpec(Task.COMFORT_PROBE, Condition(version, "off")))
    static_combos = [(plane, power) for plane in cfg.static_planes
                     for power in ("off", "on")]
    rng.shuffle(static_combos)
    for plane, power in static_combos:
        trials.append(TrialSpec(Task.STATIC_HOLD, Condition(version, power),
                                plane=plane, rest_s=STATIC_REST_S))
    dynamic_combos = [(plane, power) for plane in cfg.dynamic_planes
                      for power in ("off", "on")]
    rng.shuffle(dynamic_combos)
    for plane, power in dynamic_combos:
        trials.append(TrialSpec(Task.DYNAMIC_LIFT, Condition(version, power),
                                plane=plane, reps=cfg.dynamic_reps,
                                rest_s=DYNAMIC_REST_S))
    if cfg.include_transparency:
        trials.append(TrialSpec(Task.TRANSPARENCY, Condition(version, "off"),
                                plane=Plane.HORIZONTAL_ADDUCTION,
                                rest_s=TRANSPARENCY_REST_S))
    if cfg.include_pick_place:
        trials.append(TrialSpec(Task.PICK_PLACE, Condition(version, "on")))
    trials.append(TrialSpec(Task.QUEST, Condition(version, "off")))
    return trials


def _baseline_block(cfg: ProtocolConfig) -> list[TrialSpec]:
    """Trials without the device: transparency reference and pick-place."""
    trials: list[TrialSpec] = []
    if cfg.include_transparency:
        trials.append(TrialSpec(Task.TRANSPARENCY, Condition(NO_DEVICE, "off"),
                                plane=Plane.HORIZONTAL_ADDUCTION,
                                rest_s=TRANSPARENCY_REST_S,
                                arm_weight_supported=True))
    if cfg.include_pick_place:
        trials.append(TrialSpec(Task.PICK_PLACE, Condition(NO_DEVICE, "off")))
    return trials


def make_plan(seed: int, participant_ids, cfg: ProtocolConfig | None = None
              ) -> RandomizationPlan:
    """Deterministic per-participant trial ordering.

    Version wear-order is permuted per participant, as is the condition
    order inside each task; the no-device block is slotted among the
    version blocks.  The same seed always yields the same plan.
    """
    cfg = cfg or ProtocolConfig()
    pids = list(participant_ids)
    if len(set(pids)) != len(pids):
        raise InvalidConfig("duplicate participant ids")
    plans: dict[str, tuple[TrialSpec, ...]] = {}
    for pid in pids:
        rng = random.Random(f"{seed}:{pid}")
        blocks = [_version_block(v, cfg, rng) for v in cfg.versions]
        baseline = _baseline_block(cfg)
        if baseline:
            blocks.append(baseline)
        rng.shuffle(blocks)
        plans[pid] = tuple(t for block in blocks for t in block)
    return RandomizationPlan(seed=seed, trials=plans)


class StaticTrialFsm:
    """Stop-criteria machine for the loaded static hold.

    Feed it (t, elevation) samples; it reports the first of operator stop,
    sustained drop below threshold, or the time cap.  The drop criterion
    needs the angle below threshold continuously for the debounce time, and
    the endurance it reports is the moment the debounce expired.
    """

    def __init__(self, target_deg: float = STATIC_TARGET_DEG,
                 threshold_deg: float = STATIC_THRESHOLD_DEG,
                 cap_s: float = STATIC_CAP_S,
                 debounce_s: float = STATIC_DEBOUNCE_S):
        if threshold_deg >= target_deg:
            raise InvalidConfig("threshold must sit below the target")
        self.target_deg = target_deg
        self.threshold_deg = threshold_deg
        self.cap_s = cap_s
        self.debounce_s = debounce_s
        self.below_since: float | None = None
        self.stop_reason: StopReason | None = None
        self.endurance_s: float | None = None
        self._stop_requested_at: float | None = None

    @property
    def done(self) -> bool:
        return self.stop_reason is not None

    def request_stop(self, t_s: float) -> None:
        """Operator/participant voluntary stop; takes effect on next update."""
        if self._stop_requested_at is None:
            self._stop_requested_at = t_s

    def _finish(self, reason: StopReason, endurance_s: float) -> StopReason:
        self.stop_reason = reason
        self.endurance_s = endurance_s
        return reason

    def update(self, t_s: float, elevation_deg: float) -> StopReason | None:
        if self.done:
            return self.stop_reason
        if self._stop_requested_at is not None:
            return self._finish(StopReason.VOLUNTARY_STOP, self._stop_requested_at)
        if elevation_deg < self.threshold_deg:
            if self.below_since is None:
                self.below_since = t_s
            elif t_s - self.below_since >= self.debounce_s:
                return self._finish(StopReason.ANGLE_DROP,
                                    self.below_since + self.debounce_s)
        else:
            self.below_since = None
        if t_s >= self.cap_s:
            return self._finish(StopReason.TIME_CAP, self.cap_s)
        return None


def run_static_trial(samples, fsm: StaticTrialFsm | None = None
                     ) -> tuple[StopReason, float]:
    """Drive the static FSM over an iterable of (t_s, elevation_deg)."""
    fsm = fsm or StaticTrialFsm()
    for t_s, elevation in samples:
        reason = fsm.update(t_s, elevation)
        if reason is not None:
            return reason, fsm.endurance_s
    raise StreamLost("angle stream ended before any stop criterion fired")


class DynamicTrialFsm:
    """Target and setpoint scheduler for the repeated lift-hold-lower trial.

    Powered trials map the target angle to a pressure setpoint; unpowered
    trials keep the setpoint at zero throughout.
    """

    def __init__(self, condition: Condition,
                 trajectory: AngleTrajectory | None = None,
                 reps: int = 3, p_max_kpa: float = 70.0):
        if reps < 1:
            raise InvalidConfig("reps must be >= 1")
        self.condition = condition
        self.trajectory = trajectory or AngleTrajectory()
        self.reps = reps
        self.p_max_kpa = p_max_kpa

    @property
    def duration_s(self) -> float:
        return self.reps * self.trajectory.duration

    def target_at(self, t_s: float) -> float:
        if t_s < 0:
            raise ValueError("t must be non-negative")
        if t_s >= self.duration_s:
            return self.trajectory.phases[-1][2]
        return trajectory_setpoint(self.trajectory,
                                   t_s % self.trajectory.duration)

    def setpoint_at(self, t_s: float) -> float:
        if not self.condition.powered:
            return 0.0
        return pressure_for_angle(self.target_at(t_s), self.p_max_kpa)

    def finished(self, t_s: float) -> bool:
        return t_s >= self.duration_s


def pick_place_score(event_times_s, window_s: float = PICK_PLACE_WINDOW_S) -> int:
    """Blocks transferred within the scoring window (boundary inclusive)."""
    return sum(1 for t in event_times_s if 0.0 <= t <= window_s)
