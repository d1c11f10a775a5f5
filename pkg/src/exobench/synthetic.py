"""Synthetic full-session generator: an eight-person virtual cohort.

Produces complete on-disk sessions (telemetry logs, MVC recordings, comfort
maps, satisfaction forms, direction polls, manifest) whose data carry the
effects the analysis stack is supposed to recover:

  * assisted static holds last longer and need less agonist drive than
    unassisted ones (via the plant's capacity-depletion effort model),
  * median EMG frequency drifts down while the muscle fatigues,
  * the unpowered suit restricts horizontal adduction, v1 more than v2 by a
    configured margin,
  * comfort pressure maps and satisfaction scores favour v2.

Every stochastic choice is drawn from numpy Generators seeded from
(session seed, participant index, trial index), so a seed fully determines
the session bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .comfort import QUEST_ITEMS, Mark, PressureMap, region_cells
from .config import ControllerConfig, ParticipantConfig, SessionConfig
from .controller import (
    MODE_CODES,
    HysteresisController,
    bang_bang_tick,
    command_for_mode,
)
from .emg import FS_EMG
from .plant import (
    ASSIST_PROFILES,
    ActuatorState,
    HumanEffortModel,
    PlantParams,
    gravity_torque,
    simulate_human_hold,
    step_pneumatics,
)
from .protocol import (
    STATIC_TARGET_DEG,
    STATIC_THRESHOLD_DEG,
    DynamicTrialFsm,
    Plane,
    ProtocolConfig,
    RandomizationPlan,
    StopReason,
    Task,
    TrialSpec,
    compute_load,
    make_plan,
)
from .store import SessionStore
from .telemetry import (
    CtrlPayload,
    EmgPayload,
    EventPayload,
    ImuPayload,
    PressurePayload,
    StreamId,
    StreamSequencer,
    encode_frame,
)

# Body masses chosen so the cohort mean is 64.7 kg (the documented load
# example: 2.5% of 64.7 kg = 1.6175 kg).
DEFAULT_COHORT_MASS_KG = (73.5, 52.0, 83.0, 72.0, 75.0, 58.0, 54.0, 50.0)
REFERENCE_BODY_MASS_KG = 64.7

IMU_RATE_HZ = 100.0
CTRL_RATE_HZ = 200.0

# Unrestricted horizontal-adduction excursion and how much each suit
# version passively restricts it.  v1 minus v2 is the margin the analysis
# is expected to recover.
ROM_FULL_DEG = 130.0
ROM_RESTRICTION_DEG = {"v1": 30.0, "v2": 15.0}

MVC_TRIAL_COUNT = 3
MVC_DURATION_S = 2.0

# Spectral model of the surface EMG carrier: a noise band whose centre
# tracks remaining capacity (fresh muscle ~ base frequency, fatigued lower).
BASE_MDF_HZ = 96.0
MDF_CAPACITY_SPAN = 0.30
EMG_BANDWIDTH_HZ = 80.0
MAINS_HZ = 50.0
MAINS_AMP_FRACTION = 0.05
EMG_TONE_FRACTION = 0.04  # resting drive floor, fraction of MVC amplitude

# Relative involvement of the three recorded channels per movement plane.
CHANNEL_WEIGHTS: dict[Plane, dict[str, float]] = {
    Plane.ABDUCTION: {"ad": 0.55, "md": 1.0, "pd": 0.25},
    Plane.FLEXION: {"ad": 1.0, "md": 0.5, "pd": 0.2},
    Plane.OBLIQUE: {"ad": 0.8, "md": 0.8, "pd": 0.25},
    Plane.HORIZONTAL_ADDUCTION: {"ad": 0.7, "md": 0.4, "pd": 0.3},
}


def configured_rom_margin_deg() -> float:
    """How much more v1 restricts horizontal adduction than v2."""
    return ROM_RESTRICTION_DEG["v1"] - ROM_RESTRICTION_DEG["v2"]


# ---------------------------------------------------------------------------
# Virtual subjects

@dataclass(frozen=True)
class VirtualSubject:
    """Per-participant physical and physiological parameters."""

    pid: str
    index: int
    body_mass_kg: float
    handedness: str
    plant: PlantParams          # loaded-arm plant, assist gain calibrated
    effort: HumanEffortModel
    base_mdf_hz: float
    mvc_amp_mv: float
    rom_offset_deg: float       # individual spread of full adduction range

    @property
    def side(self) -> str:
        return self.handedness


def _calibrated_plant(base: PlantParams, body_mass_kg: float,
                      assist_shortfall: float) -> PlantParams:
    """Scale the arm to the subject and tune assist so full inflation covers
    (1 - assist_shortfall) of the loaded gravity demand at 90 deg."""
    scale = body_mass_kg / REFERENCE_BODY_MASS_KG
    params = replace(
        base,
        arm_mass=base.arm_mass * scale,
        inertia=base.inertia * scale,
        load_mass=compute_load(body_mass_kg),
    )
    demand = gravity_torque(STATIC_TARGET_DEG, params)
    weight = ASSIST_PROFILES[params.assist_profile](STATIC_TARGET_DEG)
    gain = (1.0 - assist_shortfall) * demand / (params.p_max * weight)
    return replace(params, assist_gain=gain)


def build_subject(pid: str, index: int, body_mass_kg: float, handedness: str,
                  base_plant: PlantParams, seed: int) -> VirtualSubject:
    rng = np.random.default_rng([seed, index, 0xC0])
    assist_shortfall = rng.uniform(0.03, 0.08)
    plant = _calibrated_plant(base_plant, body_mass_kg, assist_shortfall)
    demand = gravity_torque(STATIC_TARGET_DEG, plant)
    # tau_max sized so the unassisted hold saturates well before the trial
    # cap; fatigue_rate spreads endurance across the cohort.
    effort = HumanEffortModel(
        tau_max=demand / rng.uniform(0.45, 0.52),
        fatigue_rate=rng.uniform(0.016, 0.023),
        recovery_rate=0.0005,
    )
    return VirtualSubject(
        pid=pid,
        index=index,
        body_mass_kg=body_mass_kg,
        handedness=handedness,
        plant=plant,
        effort=effort,
        base_mdf_hz=BASE_MDF_HZ + rng.uniform(-6.0, 6.0),
        mvc_amp_mv=rng.uniform(0.8, 1.4),
        rom_offset_deg=rng.uniform(-2.0, 2.0),
    )


def cohort_subjects(config: SessionConfig, seed: int) -> list[VirtualSubject]:
    return [
        build_subject(p.id, i, p.body_mass_kg, p.handedness, config.plant, seed)
        for i, p in enumerate(config.participants)
    ]


def desk_session_config() -> SessionConfig:
    """Compact configuration sized so a full 8-subject session generates and
    analyzes in well under two minutes."""
    participants = tuple(
        ParticipantConfig(
            id=f"p{i + 1:02d}",
            body_mass_kg=mass,
            handedness="left" if i == 2 else "right",
        )
        for i, mass in enumerate(DEFAULT_COHORT_MASS_KG)
    )
    protocol = ProtocolConfig(
        static_planes=(Plane.ABDUCTION,),
        dynamic_planes=(Plane.ABDUCTION,),
        static_cap_s=90.0,
    )
    return SessionConfig(
        participants=participants,
        plant=PlantParams(),
        controller=ControllerConfig(),
        protocol=protocol,
    )


# ---------------------------------------------------------------------------
# Quaternion scripting (vectorized; w-x-y-z order, world Z up / X forward)

def _quat_axis(axis: int, deg: np.ndarray) -> np.ndarray:
    half = np.radians(np.asarray(deg, dtype=float)) * 0.5
    q = np.zeros((half.size, 4))
    q[:, 0] = np.cos(half)
    q[:, 1 + axis] = np.sin(half)
    return q


def _qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a[:, 0], a[:, 1], a[:, 2], a[:, 3]
    w2, x2, y2, z2 = b[:, 0], b[:, 1], b[:, 2], b[:, 3]
    return np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=1)


def arm_quats_elevation(plane: Plane, theta_deg: np.ndarray, side: str) -> np.ndarray:
    """Upper-arm orientation for a pure elevation movement in one plane."""
    theta = np.asarray(theta_deg, dtype=float)
    if plane is Plane.FLEXION:
        return _quat_axis(1, -theta)                 # forward, either side
    sign = -1.0 if side == "right" else 1.0
    return _quat_axis(0, sign * theta)               # lateral raise


def arm_quats_horizontal(psi_deg: np.ndarray, elevation_deg: np.ndarray,
                         side: str) -> np.ndarray:
    """Arm abducted to elevation_deg, then swept psi_deg toward the front."""
    sign = -1.0 if side == "right" else 1.0
    lift = _quat_axis(0, sign * np.asarray(elevation_deg, dtype=float))
    sweep = _quat_axis(2, -sign * np.asarray(psi_deg, dtype=float))
    return _qmul(sweep, lift)


def torso_quats(yaw_deg: np.ndarray) -> np.ndarray:
    return _quat_axis(2, np.asarray(yaw_deg, dtype=float))


def forearm_quats(q_arm: np.ndarray, elbow_deg: np.ndarray) -> np.ndarray:
    return _qmul(q_arm, _quat_axis(0, np.asarray(elbow_deg, dtype=float)))


def _wobble(t: np.ndarray, rng: np.random.Generator, amp: float) -> np.ndarray:
    """Smooth low-frequency sensor/posture wander."""
    p1, p2 = rng.uniform(0.0, 2.0 * math.pi, size=2)
    return amp * (0.7 * np.sin(2.0 * math.pi * 0.31 * t + p1)
                  + 0.3 * np.sin(2.0 * math.pi * 0.053 * t + p2))


# ---------------------------------------------------------------------------
# EMG synthesis

def synth_emg(rng: np.random.Generator, drive: np.ndarray,
              center_hz: np.ndarray, amp_mv: float,
              fs: float = FS_EMG, bandwidth_hz: float = EMG_BANDWIDTH_HZ,
              mains_amp_mv: float = 0.0) -> np.ndarray:
    """Band-limited noise carrier with per-second spectral centre control.

    Overlap-added 1 s Hann blocks of frequency-shaped Gaussian noise; the
    output is variance-normalized so the rectified envelope tracks
    amp_mv * drive, and the spectral median tracks center_hz.
    """
    drive = np.asarray(drive, dtype=float)
    n = drive.size
    if n == 0:
        return np.zeros(0)
    center = np.broadcast_to(np.asarray(center_hz, dtype=float), (n,))

    win_n = int(round(fs))
    hop = win_n // 2
    window = np.hanning(win_n)
    freqs = np.fft.rfftfreq(win_n, 1.0 / fs)
    sigma = bandwidth_hz / 2.355  # FWHM -> standard deviation

    total = n + win_n
    x = np.zeros(total)
    norm = np.zeros(total)
    for start in range(0, n, hop):
        fc = center[min(start + hop, n - 1)]
        shape = np.exp(-0.5 * ((freqs - fc) / sigma) ** 2)
        spec = (rng.standard_normal(freqs.size)
                + 1j * rng.standard_normal(freqs.size)) * shape
        block = np.fft.irfft(spec, n=win_n)
        std = block.std()
        if std > 0:
            block /= std
        x[start:start + win_n] += window * block
        norm[start:start + win_n] += window * window
    x = x[:n] / np.sqrt(np.maximum(norm[:n], 1e-12))

    out = amp_mv * drive * x
    if mains_amp_mv > 0.0:
        t = np.arange(n) / fs
        out = out + mains_amp_mv * np.sin(
            2.0 * math.pi * MAINS_HZ * t + rng.uniform(0.0, 2.0 * math.pi))
    return out


def fatigue_drift_signal(duration_s: float = 60.0, fs: float = FS_EMG,
                         f_start_hz: float = 102.0,
                         slope_hz_per_s: float = -0.4,
                         noise_amp: float = 0.01,
                         seed: int = 0) -> np.ndarray:
    """Narrowband tone whose instantaneous frequency falls linearly.

    With the default 5 s epochs the per-epoch spectral medians land on
    101, 99, 97, ... Hz, so the first-two/last-two epoch medians over 60 s
    are exactly 100 and 80 Hz: a -20% relative drift.
    """
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    phase = 2.0 * math.pi * (f_start_hz * t + 0.5 * slope_hz_per_s * t * t)
    rng = np.random.default_rng(seed)
    return np.sin(phase) + noise_amp * rng.standard_normal(n)


def _channel_drives(plane: Plane, drive: np.ndarray) -> dict[str, np.ndarray]:
    weights = CHANNEL_WEIGHTS[plane]
    return {
        ch: EMG_TONE_FRACTION + (1.0 - EMG_TONE_FRACTION) * w * drive
        for ch, w in weights.items()
    }


# ---------------------------------------------------------------------------
# Trial stream assembly

_STREAM_ORDER = {
    StreamId.EVENT: 0,
    StreamId.IMU: 1,
    StreamId.PRESSURE: 2,
    StreamId.CTRL: 3,
    StreamId.EMG: 4,
}

_VALVE_BITS_FOR_CODE = {
    code: command_for_mode(mode).bits() for mode, code in MODE_CODES.items()
}


@dataclass
class TrialStreams:
    """Everything one trial writes to its log, in engineering units."""

    imu_t_s: np.ndarray | None = None
    q_torso: np.ndarray | None = None        # (n, 4)
    q_arm: np.ndarray | None = None
    q_forearm: np.ndarray | None = None
    emg_mv: dict[str, np.ndarray] = field(default_factory=dict)  # 2 kHz
    ctrl_t_s: np.ndarray | None = None
    pressure_kpa: np.ndarray | None = None
    setpoint_kpa: np.ndarray | None = None
    mode_codes: np.ndarray | None = None
    events: list[tuple[float, str, dict]] = field(default_factory=list)


def encode_trial_log(streams: TrialStreams) -> bytes:
    """Serialize one trial's streams into time-ordered wire frames."""
    entries: list[tuple[int, int, int, bytes]] = []
    seqs = {sid: StreamSequencer(sid) for sid in _STREAM_ORDER}

    def add(sid: StreamId, t_us: int, payload) -> None:
        frame = seqs[sid].frame(t_us, payload)
        entries.append((t_us, _STREAM_ORDER[sid], frame.seq, encode_frame(frame)))

    for t_s, kind, data in streams.events:
        add(StreamId.EVENT, int(round(t_s * 1e6)), EventPayload(kind, data))

    if streams.imu_t_s is not None:
        qt = streams.q_torso.astype(np.float32).astype(float).tolist()
        qa = streams.q_arm.astype(np.float32).astype(float).tolist()
        qf = streams.q_forearm.astype(np.float32).astype(float).tolist()
        for i, t_s in enumerate(streams.imu_t_s.tolist()):
            add(StreamId.IMU, int(round(t_s * 1e6)),
                ImuPayload(qt[i], qa[i], qf[i]))

    if streams.ctrl_t_s is not None:
        p = streams.pressure_kpa.astype(np.float32).astype(float).tolist()
        sp = streams.setpoint_kpa.astype(np.float32).astype(float).tolist()
        modes = streams.mode_codes.tolist()
        for i, t_s in enumerate(streams.ctrl_t_s.tolist()):
            t_us = int(round(t_s * 1e6))
            add(StreamId.PRESSURE, t_us, PressurePayload(p[i], sp[i]))
            add(StreamId.CTRL, t_us,
                CtrlPayload(modes[i], _VALVE_BITS_FOR_CODE[modes[i]]))

    if streams.emg_mv:
        sample_us = 1e6 / FS_EMG
        chans = {
            ch: streams.emg_mv[ch].astype(np.float32).astype(float)
            for ch in ("ad", "md", "pd")
        }
        n_blocks = min(len(v) for v in chans.values()) // 20
        blocks = {
            ch: v[:n_blocks * 20].reshape(n_blocks, 20).tolist()
            for ch, v in chans.items()
        }
        for b in range(n_blocks):
            add(StreamId.EMG, int(round(b * 20 * sample_us)),
                EmgPayload(blocks["ad"][b], blocks["md"][b], blocks["pd"][b]))

    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    return b"".join(e[3] for e in entries)


def _trial_meta(subject: VirtualSubject, spec: TrialSpec, **extra) -> dict:
    meta = {
        "trial_id": spec.trial_id,
        "participant": subject.pid,
        "task": spec.task.value,
        "version": spec.condition.version,
        "power": spec.condition.power,
        "plane": spec.plane.value if spec.plane else None,
        "reps": spec.reps,
        "arm_weight_supported": spec.arm_weight_supported,
        "handedness": subject.handedness,
    }
    meta.update(extra)
    return meta


def _stop_event(t_s: float, reason: StopReason, **extra) -> tuple[float, str, dict]:
    # +1 us so the stop marker sorts after same-tick samples
    return (t_s + 1e-6, "trial_stop", {"stop_reason": reason.value, **extra})


# ---------------------------------------------------------------------------
# Per-task generators

def _resample(t_new: np.ndarray, t_old: np.ndarray, values: np.ndarray,
              end_t: float) -> np.ndarray:
    """Interpolate a recorded series onto a new grid, held flat to end_t."""
    t_ext = np.append(t_old, end_t + 1.0)
    v_ext = np.append(values, values[-1])
    return np.interp(t_new, t_ext, v_ext)


def static_trial_streams(subject: VirtualSubject, spec: TrialSpec,
                         cap_s: float, rng: np.random.Generator
                         ) -> tuple[TrialStreams, StopReason, float]:
    """Simulate one loaded static hold and lay it out as telemetry."""
    effort = replace(
        subject.effort,
        fatigue_rate=subject.effort.fatigue_rate * rng.uniform(0.95, 1.05),
        capacity=1.0 - rng.uniform(0.0, 0.02),
    )
    hold = simulate_human_hold(
        STATIC_TARGET_DEG, spec.condition.powered, effort, subject.plant,
        cap=cap_s,
    )
    dropped = hold.stop_reason == "angle_drop"
    # Recording runs a little past the stop criterion so the offline FSM
    # (which sees 100 Hz samples, not the 1 kHz sim grid) can confirm the
    # debounce expiry inside the log.
    end_t = hold.endurance + 0.6 if dropped else cap_s

    n100 = int(math.floor(end_t * IMU_RATE_HZ + 1e-6)) + 1
    t100 = np.arange(n100) / IMU_RATE_HZ
    theta = _resample(t100, hold.times, hold.theta_series, end_t)
    theta = theta + _wobble(t100, rng, 0.15)

    side = subject.side
    q_arm = arm_quats_elevation(spec.plane, theta, side)
    yaw = _wobble(t100, rng, 0.4)
    elbow = 10.0 + _wobble(t100, rng, 1.5)
    streams = TrialStreams(
        imu_t_s=t100,
        q_torso=torso_quats(yaw),
        q_arm=q_arm,
        q_forearm=forearm_quats(q_arm, elbow),
    )

    n2k = int(math.floor(end_t * FS_EMG + 1e-6))
    t2k = np.arange(n2k) / FS_EMG
    tau_m = _resample(t2k, hold.times, hold.muscle_torque_series, end_t)
    capacity = _resample(t2k, hold.times, hold.capacity_series, end_t)
    drive = np.clip(tau_m / (effort.tau_max * np.maximum(capacity, 0.05)),
                    0.0, 1.05)
    center = subject.base_mdf_hz * (
        1.0 - MDF_CAPACITY_SPAN + MDF_CAPACITY_SPAN * capacity)
    for ch, ch_drive in _channel_drives(spec.plane, drive).items():
        streams.emg_mv[ch] = synth_emg(
            rng, ch_drive, center, subject.mvc_amp_mv,
            mains_amp_mv=MAINS_AMP_FRACTION * subject.mvc_amp_mv)

    if spec.condition.powered:
        n200 = int(math.floor(end_t * CTRL_RATE_HZ + 1e-6)) + 1
        extra = n200 - hold.pressure_series.size
        streams.ctrl_t_s = np.arange(n200) / CTRL_RATE_HZ
        streams.pressure_kpa = np.concatenate([
            hold.pressure_series,
            np.full(max(extra, 0), hold.pressure_series[-1]),
        ])[:n200]
        streams.mode_codes = np.concatenate([
            hold.mode_series,
            np.full(max(extra, 0), hold.mode_series[-1], dtype=np.uint8),
        ])[:n200]
        streams.setpoint_kpa = np.full(n200, hold.setpoint_kpa)

    reason = StopReason.ANGLE_DROP if dropped else StopReason.TIME_CAP
    streams.events.append((0.0, "trial_start", _trial_meta(
        subject, spec,
        target_deg=STATIC_TARGET_DEG,
        threshold_deg=STATIC_THRESHOLD_DEG,
        cap_s=cap_s,
        load_kg=round(subject.plant.load_mass, 6),
    )))
    streams.events.append(_stop_event(end_t, reason,
                                      endurance_s=round(hold.endurance, 6)))
    return streams, reason, end_t


def dynamic_trial_streams(subject: VirtualSubject, spec: TrialSpec,
                          rng: np.random.Generator
                          ) -> tuple[TrialStreams, StopReason, float]:
    """Scripted lift-hold-lower repetitions with closed-loop pressure."""
    plant = replace(subject.plant, load_mass=0.0)  # no hand load when lifting
    fsm = DynamicTrialFsm(spec.condition, reps=spec.reps,
                          p_max_kpa=plant.p_max)
    dur = fsm.duration_s
    dt = 1.0 / CTRL_RATE_HZ
    n200 = int(round(dur * CTRL_RATE_HZ))
    t200 = np.arange(n200) * dt
    target = np.array([fsm.target_at(t) for t in t200])
    setpoint = np.array([fsm.setpoint_at(t) for t in t200])

    # The participant tracks the displayed target with a short lag.
    theta = np.empty(n200)
    theta[0] = target[0]
    alpha = dt / 0.15
    for i in range(1, n200):
        theta[i] = theta[i - 1] + alpha * (target[i - 1] - theta[i - 1])

    pressure = np.zeros(n200)
    modes = np.zeros(n200, dtype=np.uint8)
    if spec.condition.powered:
        ctrl = HysteresisController(setpoint=setpoint[0])
        act = ActuatorState()
        for i in range(n200):
            ctrl, cmd = bang_bang_tick(ctrl.with_setpoint(setpoint[i]),
                                       act.pressure)
            pressure[i] = act.pressure
            modes[i] = MODE_CODES[ctrl.mode]
            act = step_pneumatics(act, cmd, dt, plant)

    lever = (plant.arm_mass * 9.81 * plant.arm_com_dist
             + plant.load_mass * 9.81 * plant.hand_dist)
    grav = lever * np.sin(np.radians(theta))
    weight = np.clip(np.sin(np.radians(theta + 20.0)), 0.0, None)
    assist = plant.assist_gain * pressure * weight
    tau_m = np.clip(grav - assist, 0.0, None)
    drive200 = np.clip(tau_m / subject.effort.tau_max, 0.0, 1.05)

    n100 = int(round(dur * IMU_RATE_HZ))
    t100 = np.arange(n100) / IMU_RATE_HZ
    theta100 = np.interp(t100, t200, theta) + _wobble(t100, rng, 0.2)
    q_arm = arm_quats_elevation(spec.plane, np.clip(theta100, 0.0, 179.0),
                                subject.side)
    elbow = 12.0 + _wobble(t100, rng, 2.0)

    n2k = int(round(dur * FS_EMG))
    t2k = np.arange(n2k) / FS_EMG
    drive = np.interp(t2k, t200, drive200)

    streams = TrialStreams(
        imu_t_s=t100,
        q_torso=torso_quats(_wobble(t100, rng, 0.4)),
        q_arm=q_arm,
        q_forearm=forearm_quats(q_arm, elbow),
    )
    for ch, ch_drive in _channel_drives(spec.plane, drive).items():
        streams.emg_mv[ch] = synth_emg(
            rng, ch_drive, subject.base_mdf_hz, subject.mvc_amp_mv,
            mains_amp_mv=MAINS_AMP_FRACTION * subject.mvc_amp_mv)
    if spec.condition.powered:
        streams.ctrl_t_s = t200
        streams.pressure_kpa = pressure
        streams.setpoint_kpa = setpoint
        streams.mode_codes = modes

    streams.events.append((0.0, "trial_start", _trial_meta(subject, spec)))
    for rep in range(spec.reps):
        streams.events.append((rep * fsm.trajectory.duration, "rep_start",
                               {"rep": rep + 1}))
    streams.events.append(_stop_event(dur, StopReason.COMPLETED,
                                      reps_done=spec.reps))
    return streams, StopReason.COMPLETED, dur


def transparency_trial_streams(subject: VirtualSubject, spec: TrialSpec,
                               rng: np.random.Generator
                               ) -> tuple[TrialStreams, StopReason, float]:
    """Repeated horizontal-adduction sweeps at 90 deg elevation.

    The unpowered suit passively restricts the sweep amplitude; the
    no-device condition reaches the subject's full range.
    """
    restriction = ROM_RESTRICTION_DEG.get(spec.condition.version, 0.0)
    psi_max = (ROM_FULL_DEG + subject.rom_offset_deg - restriction
               + rng.uniform(-1.0, 1.0))

    lead_s, sweep_s, pause_s = 1.0, 6.0, 1.0
    reps = 3
    dur = lead_s + reps * (sweep_s + pause_s)
    n100 = int(round(dur * IMU_RATE_HZ))
    t100 = np.arange(n100) / IMU_RATE_HZ

    psi = np.zeros(n100)
    for rep in range(reps):
        t0 = lead_s + rep * (sweep_s + pause_s)
        in_rep = (t100 >= t0) & (t100 < t0 + sweep_s)
        phase = (t100[in_rep] - t0) / sweep_s
        psi[in_rep] = psi_max * 0.5 * (1.0 - np.cos(2.0 * math.pi * phase))

    elevation = 90.0 + _wobble(t100, rng, 0.25)
    q_arm = arm_quats_horizontal(psi, elevation, subject.side)
    elbow = 8.0 + _wobble(t100, rng, 1.0)

    streams = TrialStreams(
        imu_t_s=t100,
        q_torso=torso_quats(_wobble(t100, rng, 0.4)),
        q_arm=q_arm,
        q_forearm=forearm_quats(q_arm, elbow),
    )
    # Light, roughly constant effort; slightly higher against a stiffer suit.
    n2k = int(round(dur * FS_EMG))
    base_drive = 0.08 + 0.0015 * restriction
    drive = np.full(n2k, base_drive)
    for ch, ch_drive in _channel_drives(spec.plane, drive).items():
        streams.emg_mv[ch] = synth_emg(
            rng, ch_drive, subject.base_mdf_hz, subject.mvc_amp_mv,
            mains_amp_mv=MAINS_AMP_FRACTION * subject.mvc_amp_mv)

    streams.events.append((0.0, "trial_start", _trial_meta(subject, spec)))
    streams.events.append(_stop_event(dur, StopReason.COMPLETED))
    return streams, StopReason.COMPLETED, dur


def pick_place_trial_streams(subject: VirtualSubject, spec: TrialSpec,
                             rng: np.random.Generator
                             ) -> tuple[TrialStreams, StopReason, float]:
    """Block-transfer events; scored over the first 60 s."""
    mean_gap = 2.7 if not spec.condition.powered else 2.85
    dur = 65.0
    streams = TrialStreams()
    streams.events.append((0.0, "trial_start", _trial_meta(subject, spec)))
    t = rng.uniform(1.5, 3.0)
    count = 0
    while t < dur - 1.0:
        streams.events.append((t, "block_transfer", {"n": count + 1}))
        count += 1
        t += mean_gap * rng.uniform(0.75, 1.25)
    streams.events.append(_stop_event(dur, StopReason.COMPLETED,
                                      transfers=count))
    return streams, StopReason.COMPLETED, dur


def mvc_trial_streams(subject: VirtualSubject, trial_idx: int,
                      rng: np.random.Generator) -> TrialStreams:
    """One maximal-effort calibration recording (all channels driven)."""
    n = int(round(MVC_DURATION_S * FS_EMG))
    t = np.arange(n) / FS_EMG
    ramp = np.clip(t / 0.15, 0.0, 1.0) * np.clip((MVC_DURATION_S - t) / 0.15,
                                                 0.0, 1.0)
    drive = ramp * rng.uniform(0.97, 1.03)
    streams = TrialStreams()
    streams.events.append((0.0, "mvc_start", {
        "participant": subject.pid, "trial": trial_idx + 1,
    }))
    for ch in ("ad", "md", "pd"):
        streams.emg_mv[ch] = synth_emg(
            rng, drive, subject.base_mdf_hz, subject.mvc_amp_mv,
            mains_amp_mv=MAINS_AMP_FRACTION * subject.mvc_amp_mv)
    return streams


# ---------------------------------------------------------------------------
# Surveys

def _marks_for_score(cells: np.ndarray, score: float,
                     rng: np.random.Generator) -> list[Mark]:
    """Compose marks over a region's cells that land near a target score."""
    score = float(np.clip(score, 0.0, 3.0))
    if score <= 0.0:
        return []
    n = cells.size
    n3 = int(n * min(score / 3.0, 1.0) * 0.10)
    n2 = int(n * min(score / 2.0, 1.0) * 0.35)
    used = (3.0 * n3 + 2.0 * n2) / n
    n1 = int(round(n * max(score - used, 0.0)))
    n1 = min(n1, n - n3 - n2)
    marks = []
    start = int(rng.integers(0, max(n - n3 - n2 - n1, 1)))
    pos = start
    for count, intensity in ((n3, 3), (n2, 2), (n1, 1)):
        if count > 0:
            marks.append(Mark(cells=tuple(int(c) for c in
                                          cells[pos:pos + count]),
                              intensity=intensity))
            pos += count
    return marks


# Group-level comfort targets per region; v2 is the softer interface.
_COMFORT_TARGETS = {
    "v1": {"upper_arm": 0.65, "armpit": 1.50, "flank": 0.35, "torso": 0.12},
    "v2": {"upper_arm": 0.40, "armpit": 0.55, "flank": 0.25, "torso": 0.08},
}

_QUEST_BASE = {
    "v1": {"size": 3, "weight": 3, "adjustability": 3, "safety": 4,
           "durability": 4, "ease_of_use": 3, "comfort": 3, "effectiveness": 3},
    "v2": {"size": 4, "weight": 3, "adjustability": 4, "safety": 4,
           "durability": 4, "ease_of_use": 4, "comfort": 4, "effectiveness": 4},
}

_DIRECTION_WEIGHTS = {
    "v1": {"front": 0.20, "side": 0.55, "oblique": 0.25},
    "v2": {"front": 0.30, "side": 0.20, "oblique": 0.50},
}


def comfort_map(subject: VirtualSubject, version: str,
                rng: np.random.Generator) -> PressureMap:
    marks: list[Mark] = []
    for region, target in _COMFORT_TARGETS[version].items():
        score = target * rng.uniform(0.7, 1.3)
        marks.extend(_marks_for_score(region_cells(region), score, rng))
    return PressureMap(participant=subject.pid, version=version,
                       marks=tuple(marks))


def quest_scores(subject: VirtualSubject, version: str,
                 rng: np.random.Generator) -> dict[str, int]:
    scores = {}
    for item in QUEST_ITEMS:
        s = _QUEST_BASE[version][item]
        if rng.uniform() < 0.35:
            s += int(rng.integers(-1, 2))
        scores[item] = int(np.clip(s, 1, 5))
    return scores


def direction_choice(version: str, rng: np.random.Generator) -> str:
    weights = _DIRECTION_WEIGHTS[version]
    names = list(weights)
    return str(rng.choice(names, p=[weights[k] for k in names]))


# ---------------------------------------------------------------------------
# Session generation

_SURVEY_DURATION_S = 120.0

_TRIAL_BUILDERS = {
    Task.STATIC_HOLD: "static",
    Task.DYNAMIC_LIFT: "dynamic",
    Task.TRANSPARENCY: "transparency",
    Task.PICK_PLACE: "pick_place",
}


def _generate_participant(store: SessionStore, subject: VirtualSubject,
                          specs: Iterable[TrialSpec], cap_s: float,
                          seed: int) -> dict:
    store.ensure_participant(subject.pid)
    pdir = store.participant_dir(subject.pid)

    mvc_dir = pdir / "mvc"
    mvc_dir.mkdir(parents=True, exist_ok=True)
    mvc_paths = []
    for k in range(MVC_TRIAL_COUNT):
        rng = np.random.default_rng([seed, subject.index, 1000 + k])
        path = mvc_dir / f"mvc-{k + 1}.exolog"
        path.write_bytes(encode_trial_log(mvc_trial_streams(subject, k, rng)))
        mvc_paths.append(str(path.relative_to(store.root)))

    surveys_dir = pdir / "surveys"
    surveys_dir.mkdir(parents=True, exist_ok=True)
    surveys: dict = {"comfort": {}, "quest": {}, "directions": None}

    trials = []
    clock = 0.0
    for t_idx, spec in enumerate(specs):
        rng = np.random.default_rng([seed, subject.index, 2000 + t_idx])
        version = spec.condition.version
        record: dict = {
            "trial_id": spec.trial_id,
            "task": spec.task.value,
            "version": version,
            "power": spec.condition.power,
            "plane": spec.plane.value if spec.plane else None,
            "reps": spec.reps,
            "rest_s": spec.rest_s,
            "arm_weight_supported": spec.arm_weight_supported,
            "start_s": round(clock, 3),
        }

        if spec.task is Task.COMFORT_PROBE:
            pmap = comfort_map(subject, version, rng)
            path = surveys_dir / f"comfort_{version}.json"
            path.write_text(json.dumps(pmap.to_json(), indent=2,
                                       sort_keys=True))
            surveys["comfort"][version] = str(path.relative_to(store.root))
            duration, reason, log_rel = _SURVEY_DURATION_S, StopReason.COMPLETED, None
        elif spec.task is Task.QUEST:
            form = {"participant": subject.pid, "version": version,
                    "scores": quest_scores(subject, version, rng)}
            path = surveys_dir / f"quest_{version}.json"
            path.write_text(json.dumps(form, indent=2, sort_keys=True))
            surveys["quest"][version] = str(path.relative_to(store.root))
            duration, reason, log_rel = _SURVEY_DURATION_S, StopReason.COMPLETED, None
        else:
            kind = _TRIAL_BUILDERS[spec.task]
            if kind == "static":
                streams, reason, duration = static_trial_streams(
                    subject, spec, cap_s, rng)
            elif kind == "dynamic":
                streams, reason, duration = dynamic_trial_streams(
                    subject, spec, rng)
            elif kind == "transparency":
                streams, reason, duration = transparency_trial_streams(
                    subject, spec, rng)
            else:
                streams, reason, duration = pick_place_trial_streams(
                    subject, spec, rng)
            log_path = store.trial_log_path(subject.pid, spec.trial_id)
            log_path.write_bytes(encode_trial_log(streams))
            log_rel = str(log_path.relative_to(store.root))

        record["stop_s"] = round(clock + duration, 3)
        record["stop_reason"] = reason.value
        record["log"] = log_rel
        trials.append(record)
        clock += duration + spec.rest_s

    rng = np.random.default_rng([seed, subject.index, 3000])
    directions = {v: direction_choice(v, rng)
                  for v in sorted(surveys["quest"])}
    path = surveys_dir / "directions.json"
    path.write_text(json.dumps({"participant": subject.pid,
                                "responses": directions},
                               indent=2, sort_keys=True))
    surveys["directions"] = str(path.relative_to(store.root))

    return {
        "id": subject.pid,
        "body_mass_kg": subject.body_mass_kg,
        "handedness": subject.handedness,
        "load_kg": round(subject.plant.load_mass, 6),
        "mvc_logs": mvc_paths,
        "surveys": surveys,
        "trials": trials,
    }


def _jsonable(obj):
    if hasattr(obj, "value") and not isinstance(obj, (int, float, str)):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    return obj


def generate_session(root: str | Path, config: SessionConfig, seed: int
                     ) -> SessionStore:
    """Write a complete synthetic session under root and return its store."""
    from dataclasses import asdict

    store = SessionStore(root)
    store.root.mkdir(parents=True, exist_ok=True)
    plan: RandomizationPlan = make_plan(
        seed, [p.id for p in config.participants], config.protocol)
    subjects = cohort_subjects(config, seed)

    participants = [
        _generate_participant(store, subj, plan.for_participant(subj.pid),
                              config.protocol.static_cap_s, seed)
        for subj in subjects
    ]

    store.write_manifest({
        "format": 1,
        "seed": seed,
        "plant": _jsonable(asdict(config.plant)),
        "controller": _jsonable(asdict(config.controller)),
        "protocol": _jsonable(asdict(config.protocol)),
        "rom_restriction_deg": ROM_RESTRICTION_DEG,
        "participants": participants,
    })
    return store
