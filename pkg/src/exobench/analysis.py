"""Offline session analysis: from stored telemetry logs to result tables.

Everything here is a pure function of the bytes in the session directory:
re-running the analysis (or re-exporting the report) on an unchanged
session produces identical output, byte for byte.  Endurance times are
recomputed from the logged IMU stream with the same stop-criteria machine
the rig runs online; the rig's own numbers are carried along only as a
cross-check column.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import emg as emg_mod
from .comfort import (
    DirectionResponse,
    GroupItemDelta,
    QuestForm,
    RegionComparison,
    compare_versions,
    direction_tally,
    load_pressure_map,
    quest_group_deltas,
)
from .kinematics import (
    JointAngleSeries,
    NoRepetitionsFound,
    joint_angles_batch,
    segment_rom,
    torso_yaw_deg,
)
from .protocol import (
    Plane,
    ProtocolConfig,
    StaticTrialFsm,
    Task,
    make_plan,
    pick_place_score,
    run_static_trial,
)
from .stats import (
    AllZeroDifferences,
    TestResult,
    TooFewPairs,
    adjust_family,
    paired_comparison,
)
from .store import SessionStore
from .telemetry import EMG_CHANNELS, StreamId, read_log

ANGLES_HEADER = ("t_s", "sEL_deg", "sAZ_deg", "eFE_deg", "tTO_deg")
EMG_METRICS_HEADER = ("channel", "median_activation_pct",
                      "mdf_slope_pct_per_s", "mdf_delta_pct")
MDF_EPOCHS_HEADER = ("channel", "epoch_center_s", "mdf_hz", "normalized_pct")

# Channel that carries the movement in each plane; effort comparisons are
# run on it.
AGONIST_CHANNEL = {
    Plane.ABDUCTION: "MD",
    Plane.FLEXION: "AD",
    Plane.OBLIQUE: "AD",
    Plane.HORIZONTAL_ADDUCTION: "AD",
}

POOLED_BASELINE_LABEL = "unassisted"

MVC_REQUIREMENT = ("activation normalization and median-frequency trends "
                   "require three maximal-effort calibration recordings "
                   "per participant")


class MissingTrials(ValueError):
    """The session directory lacks trials the analysis depends on."""


class CorruptLog(ValueError):
    pass


class UnknownReportFormat(ValueError):
    pass


# ---------------------------------------------------------------------------
# Log demultiplexing

@dataclass
class TrialSignals:
    """One trial's log, split back into engineering-unit streams."""

    path: Path
    meta: dict                      # trial_start event payload
    stop: dict                      # trial_stop event payload
    imu_t_s: np.ndarray             # (n,)
    q_torso: np.ndarray             # (n, 4)
    q_upper_arm: np.ndarray
    q_forearm: np.ndarray
    emg_mv: dict[str, np.ndarray]   # channel -> 2 kHz samples
    events: list[tuple[float, str, dict]]

    @property
    def has_imu(self) -> bool:
        return self.imu_t_s.size > 0


def load_trial_signals(path: str | Path) -> TrialSignals:
    path = Path(path)
    frames, bad = read_log(path)
    if bad:
        raise CorruptLog(f"{path}: {bad} undecodable bytes")
    imu_t, qt, qa, qf = [], [], [], []
    emg: dict[str, list] = {ch: [] for ch in EMG_CHANNELS}
    events: list[tuple[float, str, dict]] = []
    for f in frames:
        if f.stream_id == StreamId.IMU:
            imu_t.append(f.timestamp_us / 1e6)
            qt.append(f.payload.q_torso)
            qa.append(f.payload.q_upper_arm)
            qf.append(f.payload.q_forearm)
        elif f.stream_id == StreamId.EMG:
            emg["AD"].extend(f.payload.ad)
            emg["MD"].extend(f.payload.md)
            emg["PD"].extend(f.payload.pd)
        elif f.stream_id == StreamId.EVENT:
            events.append((f.timestamp_us / 1e6, f.payload.kind,
                           dict(f.payload.data)))
    meta = next((d for _, k, d in events if k == "trial_start"), {})
    stop = next((d for _, k, d in events if k == "trial_stop"), {})
    return TrialSignals(
        path=path,
        meta=meta,
        stop=stop,
        imu_t_s=np.asarray(imu_t),
        q_torso=np.asarray(qt).reshape(-1, 4),
        q_upper_arm=np.asarray(qa).reshape(-1, 4),
        q_forearm=np.asarray(qf).reshape(-1, 4),
        emg_mv={ch: np.asarray(v) for ch, v in emg.items()},
        events=events,
    )


def trial_angles(sig: TrialSignals, side: str) -> JointAngleSeries:
    """Joint angles for the whole trial; torso turn is relative to the
    heading at the first sample."""
    yaw_ref = torso_yaw_deg(sig.q_torso[0])
    return joint_angles_batch(sig.q_torso, sig.q_upper_arm, sig.q_forearm,
                              side=side, yaw_ref_deg=yaw_ref)


# ---------------------------------------------------------------------------
# Completeness checks

def _protocol_from_manifest(snapshot: dict) -> ProtocolConfig:
    return ProtocolConfig(
        versions=tuple(snapshot["versions"]),
        static_planes=tuple(Plane(p) for p in snapshot["static_planes"]),
        dynamic_planes=tuple(Plane(p) for p in snapshot["dynamic_planes"]),
        dynamic_reps=int(snapshot["dynamic_reps"]),
        static_cap_s=float(snapshot["static_cap_s"]),
        include_transparency=bool(snapshot["include_transparency"]),
        include_pick_place=bool(snapshot["include_pick_place"]),
        include_comfort=bool(snapshot["include_comfort"]),
    )


def check_completeness(store: SessionStore, manifest: dict) -> None:
    """Raise MissingTrials naming every gap the analysis would trip over."""
    protocol = _protocol_from_manifest(manifest["protocol"])
    pids = [p["id"] for p in manifest["participants"]]
    plan = make_plan(manifest["seed"], pids, protocol)
    problems: list[str] = []
    for entry in manifest["participants"]:
        pid = entry["id"]
        expected = {spec.trial_id for spec in plan.for_participant(pid)}
        recorded = {t["trial_id"] for t in entry["trials"]}
        missing = sorted(expected - recorded)
        lost = sorted(
            t["trial_id"] for t in entry["trials"]
            if t.get("log") and not (store.root / t["log"]).is_file()
        )
        if missing:
            problems.append(f"{pid}: missing trials: {', '.join(missing)}")
        if lost:
            problems.append(f"{pid}: logs not found on disk: {', '.join(lost)}")
        mvc = [m for m in entry.get("mvc_logs", ())
               if (store.root / m).is_file()]
        if len(mvc) != 3:
            problems.append(
                f"{pid}: {len(mvc)} MVC recordings present; {MVC_REQUIREMENT}")
    if problems:
        raise MissingTrials("session incomplete:\n  " + "\n  ".join(problems))


# ---------------------------------------------------------------------------
# Result rows

@dataclass(frozen=True)
class StaticRow:
    participant: str
    trial_id: str
    version: str
    power: str
    plane: str
    endurance_s: float              # recomputed from the logged angle stream
    stop_reason: str
    endurance_rig_s: float          # the rig's online value, cross-check only
    agonist: str
    activation_pct: float
    mdf_slope_pct_per_s: float
    mdf_delta_pct: float


@dataclass(frozen=True)
class RomRow:
    participant: str
    trial_id: str
    version: str
    rom_deg: float
    reps_found: int
    arm_weight_supported: bool


@dataclass(frozen=True)
class PickPlaceRow:
    participant: str
    trial_id: str
    condition: str
    transfers_in_window: int


@dataclass(frozen=True)
class DegenerateComparison:
    """Placeholder where a paired test could not run (no usable variation)."""

    label: str
    n_pairs: int
    note: str = "all paired differences are zero; no variation to test"


@dataclass
class SessionAnalysis:
    seed: int
    participants: list[str]
    mvc_mv: dict[str, dict[str, float]]
    static_rows: list[StaticRow]
    rom_rows: list[RomRow]
    pick_rows: list[PickPlaceRow]
    mdf_rows: list[dict]
    families: dict[str, list]       # TestResult | DegenerateComparison
    comfort: list[RegionComparison]
    quest: list[GroupItemDelta]
    directions: dict[str, dict[str, int]]

    def report_dict(self) -> dict:
        def rows(items):
            return [asdict(r) if not isinstance(r, dict) else r for r in items]

        return {
            "seed": self.seed,
            "participants": list(self.participants),
            "mvc_mv": self.mvc_mv,
            "endurance": rows(self.static_rows),
            "rom": rows(self.rom_rows),
            "pick_place": rows(self.pick_rows),
            "mdf": list(self.mdf_rows),
            "stats": {fam: rows(results)
                      for fam, results in sorted(self.families.items())},
            "comfort": rows(self.comfort),
            "quest": rows(self.quest),
            "directions": {v: dict(sorted(t.items()))
                           for v, t in sorted(self.directions.items())},
        }


# ---------------------------------------------------------------------------
# Derived CSV writers

def _fmt(x: float, places: int = 6) -> str:
    if isinstance(x, float) and not np.isfinite(x):
        return "NaN"
    return f"{x:.{places}f}"


def write_angles_csv(path: Path, t_s: np.ndarray, angles: JointAngleSeries
                     ) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ANGLES_HEADER)
        for i in range(t_s.size):
            w.writerow((
                _fmt(float(t_s[i]), 3),
                _fmt(float(angles.elevation_deg[i])),
                _fmt(float(angles.azimuth_deg[i])),
                _fmt(float(angles.elbow_deg[i])),
                _fmt(float(angles.torso_yaw_deg[i])),
            ))


def write_emg_csv(path: Path, rows: list[tuple[str, float, float, float]]
                  ) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EMG_METRICS_HEADER)
        for ch, act, slope, delta in rows:
            w.writerow((ch, _fmt(act, 3), _fmt(slope), _fmt(delta, 3)))


def write_mdf_csv(path: Path, rows: list[tuple[str, float, float, float]]
                  ) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MDF_EPOCHS_HEADER)
        for ch, center, mdf, norm in rows:
            w.writerow((ch, _fmt(center, 1), _fmt(mdf, 3), _fmt(norm, 3)))


# ---------------------------------------------------------------------------
# Per-participant analysis

def _load_mvc(store: SessionStore, entry: dict) -> dict[str, float]:
    trials: dict[str, list[np.ndarray]] = {ch: [] for ch in EMG_CHANNELS}
    for rel in entry["mvc_logs"]:
        sig = load_trial_signals(store.root / rel)
        for ch in EMG_CHANNELS:
            trials[ch].append(sig.emg_mv[ch])
    return {ch: emg_mod.compute_mvc(trials[ch]) for ch in EMG_CHANNELS}


def _emg_metrics(sig: TrialSignals, mvc: dict[str, float],
                 window: emg_mod.ActivationWindow | None
                 ) -> tuple[dict[str, tuple[float, float, float]],
                            list[tuple[str, float, float, float]]]:
    """Per-channel (activation, slope, delta) plus per-epoch MDF rows."""
    metrics: dict[str, tuple[float, float, float]] = {}
    epoch_rows: list[tuple[str, float, float, float]] = []
    for ch in EMG_CHANNELS:
        raw = sig.emg_mv[ch]
        conditioned = emg_mod.preprocess(raw)
        pct = emg_mod.normalize_emg(emg_mod.envelope(conditioned), mvc[ch])
        t = np.arange(pct.size) / emg_mod.FS_EMG
        w = window or emg_mod.ActivationWindow(duration_s=float(t[-1]))
        activation = emg_mod.median_activation(t, pct, w)
        trend = emg_mod.mdf_trend(conditioned)
        metrics[ch] = (activation, trend.slope_pct_per_s, trend.delta_pct)
        epoch_rows.extend(
            (ch, c, m, n) for c, m, n in zip(
                trend.epoch_centers_s, trend.mdf_hz, trend.normalized_pct))
    return metrics, epoch_rows


@dataclass
class _ParticipantResult:
    pid: str
    mvc: dict[str, float]
    static_rows: list[StaticRow] = field(default_factory=list)
    rom_rows: list[RomRow] = field(default_factory=list)
    pick_rows: list[PickPlaceRow] = field(default_factory=list)
    mdf_rows: list[dict] = field(default_factory=list)


def _analyze_participant(store: SessionStore, entry: dict) -> _ParticipantResult:
    pid = entry["id"]
    side = entry["handedness"]
    out = _ParticipantResult(pid=pid, mvc=_load_mvc(store, entry))
    derived = store.derived_dir(pid)
    derived.mkdir(parents=True, exist_ok=True)

    logged = [t for t in entry["trials"] if t.get("log")]
    signals: dict[str, TrialSignals] = {
        t["trial_id"]: load_trial_signals(store.root / t["log"])
        for t in logged
    }

    # Activation windows are shared within one plane's static family: the
    # shortest recomputed endurance across its conditions.
    static_recs = [t for t in logged
                   if t["task"] == Task.STATIC_HOLD.value]
    endurance: dict[str, tuple] = {}
    for rec in static_recs:
        sig = signals[rec["trial_id"]]
        angles = trial_angles(sig, side)
        fsm = StaticTrialFsm(
            target_deg=float(sig.meta["target_deg"]),
            threshold_deg=float(sig.meta["threshold_deg"]),
            cap_s=float(sig.meta["cap_s"]),
        )
        endurance[rec["trial_id"]] = run_static_trial(
            zip(sig.imu_t_s.tolist(), angles.elevation_deg.tolist()), fsm)

    windows: dict[str, emg_mod.ActivationWindow] = {}
    for plane in {r["plane"] for r in static_recs}:
        durations = [endurance[r["trial_id"]][1] for r in static_recs
                     if r["plane"] == plane]
        windows[plane] = emg_mod.activation_window(durations)

    for rec in logged:
        trial_id = rec["trial_id"]
        sig = signals[trial_id]
        task = Task(rec["task"])

        if sig.has_imu:
            angles = trial_angles(sig, side)
            write_angles_csv(derived / f"{trial_id}_angles.csv",
                             sig.imu_t_s, angles)

        if any(v.size for v in sig.emg_mv.values()):
            window = windows.get(rec["plane"]) \
                if task is Task.STATIC_HOLD else None
            metrics, epoch_rows = _emg_metrics(sig, out.mvc, window)
            write_emg_csv(derived / f"{trial_id}_emg.csv",
                          [(ch, *metrics[ch]) for ch in EMG_CHANNELS])
            write_mdf_csv(derived / f"{trial_id}_mdf.csv", epoch_rows)
        else:
            metrics = {}

        if task is Task.STATIC_HOLD:
            reason, endur = endurance[trial_id]
            agonist = AGONIST_CHANNEL[Plane(rec["plane"])]
            act, slope, delta = metrics[agonist]
            out.static_rows.append(StaticRow(
                participant=pid,
                trial_id=trial_id,
                version=rec["version"],
                power=rec["power"],
                plane=rec["plane"],
                endurance_s=endur,
                stop_reason=reason.value,
                endurance_rig_s=float(sig.stop.get("endurance_s", np.nan)),
                agonist=agonist,
                activation_pct=act,
                mdf_slope_pct_per_s=slope,
                mdf_delta_pct=delta,
            ))
            out.mdf_rows.extend(
                {"participant": pid, "trial_id": trial_id, "channel": ch,
                 "mdf_slope_pct_per_s": metrics[ch][1],
                 "mdf_delta_pct": metrics[ch][2]}
                for ch in EMG_CHANNELS)
        elif task is Task.TRANSPARENCY:
            az = angles.azimuth_deg
            finite = np.isfinite(az)
            if not finite.any():
                raise MissingTrials(
                    f"{pid}: {trial_id}: azimuth undefined for whole trial")
            ref = az[finite][0]
            excursion = ref - az
            try:
                segments = segment_rom(sig.imu_t_s, excursion)
            except NoRepetitionsFound:
                segments = []
            rom = max((s.rom_deg for s in segments), default=float("nan"))
            out.rom_rows.append(RomRow(
                participant=pid,
                trial_id=trial_id,
                version=rec["version"],
                rom_deg=rom,
                reps_found=len(segments),
                arm_weight_supported=bool(rec["arm_weight_supported"]),
            ))
        elif task is Task.PICK_PLACE:
            times = [t for t, kind, _ in sig.events if kind == "block_transfer"]
            out.pick_rows.append(PickPlaceRow(
                participant=pid,
                trial_id=trial_id,
                condition=_condition_label(rec),
                transfers_in_window=pick_place_score(times),
            ))
    return out


def _condition_label(rec: dict) -> str:
    if rec["version"] == "none":
        return "none"
    return f"{rec['version']}_{rec['power']}"


# ---------------------------------------------------------------------------
# Group statistics

def _paired_or_degenerate(x: list[float], y: list[float], label: str):
    try:
        return paired_comparison(x, y, label=label)
    except AllZeroDifferences:
        return DegenerateComparison(label=label, n_pairs=len(x))
    except TooFewPairs:
        return DegenerateComparison(
            label=label, n_pairs=len(x),
            note="fewer than 2 non-zero paired differences; nothing to test")


_EFFORT_FAMILY_NAMES = {"endurance_s": "endurance",
                        "activation_pct": "activation"}


def _effort_families(static_rows: list[StaticRow], value: str
                     ) -> dict[str, list]:
    """Assisted-vs-unassisted comparisons per plane for one outcome column.

    The unassisted reference pools both suits' powered-off trials by
    averaging them per participant.
    """
    families: dict[str, list] = {}
    planes = sorted({r.plane for r in static_rows})
    for plane in planes:
        rows = [r for r in static_rows if r.plane == plane]
        pids = sorted({r.participant for r in rows})
        def col(pid, version, power):
            vals = [getattr(r, value) for r in rows
                    if r.participant == pid and r.version == version
                    and r.power == power]
            return vals[0] if vals else None
        comparisons = []
        for version in ("v1", "v2"):
            assisted, baseline = [], []
            for pid in pids:
                on = col(pid, version, "on")
                offs = [col(pid, v, "off") for v in ("v1", "v2")]
                offs = [o for o in offs if o is not None]
                if on is None or not offs:
                    continue
                assisted.append(on)
                baseline.append(float(np.mean(offs)))
            if assisted:
                comparisons.append(_paired_or_degenerate(
                    assisted, baseline,
                    f"{plane}: {version}_on vs {POOLED_BASELINE_LABEL}"))
        real = [c for c in comparisons if isinstance(c, TestResult)]
        adjusted = adjust_family(real)
        it = iter(adjusted)
        families[f"{_EFFORT_FAMILY_NAMES[value]}:{plane}"] = [
            next(it) if isinstance(c, TestResult) else c for c in comparisons]
    return families


def _rom_family(rom_rows: list[RomRow]) -> list:
    by_pid: dict[str, dict[str, float]] = {}
    for r in rom_rows:
        by_pid.setdefault(r.participant, {})[r.version] = r.rom_deg
    pids = sorted(by_pid)
    comparisons = []
    for label, a, b in (("v2 vs v1", "v2", "v1"),
                        ("none vs v1", "none", "v1"),
                        ("none vs v2", "none", "v2")):
        xs, ys = [], []
        for pid in pids:
            if a in by_pid[pid] and b in by_pid[pid]:
                xs.append(by_pid[pid][a])
                ys.append(by_pid[pid][b])
        if xs:
            comparisons.append(_paired_or_degenerate(xs, ys, label))
    real = [c for c in comparisons if isinstance(c, TestResult)]
    adjusted = adjust_family(real)
    it = iter(adjusted)
    return [next(it) if isinstance(c, TestResult) else c for c in comparisons]


def _pick_family(pick_rows: list[PickPlaceRow]) -> list:
    by_pid: dict[str, dict[str, int]] = {}
    for r in pick_rows:
        by_pid.setdefault(r.participant, {})[r.condition] = \
            r.transfers_in_window
    pids = sorted(by_pid)
    comparisons = []
    for label, a, b in (("v1_on vs none", "v1_on", "none"),
                        ("v2_on vs none", "v2_on", "none")):
        xs, ys = [], []
        for pid in pids:
            if a in by_pid[pid] and b in by_pid[pid]:
                xs.append(float(by_pid[pid][a]))
                ys.append(float(by_pid[pid][b]))
        if xs:
            comparisons.append(_paired_or_degenerate(xs, ys, label))
    real = [c for c in comparisons if isinstance(c, TestResult)]
    adjusted = adjust_family(real)
    it = iter(adjusted)
    return [next(it) if isinstance(c, TestResult) else c for c in comparisons]


# ---------------------------------------------------------------------------
# Surveys

def _survey_tables(store: SessionStore, manifest: dict
                   ) -> tuple[list[RegionComparison], list[GroupItemDelta],
                              dict[str, dict[str, int]]]:
    maps: dict[str, list] = {"v1": [], "v2": []}
    forms: dict[str, list[QuestForm]] = {"v1": [], "v2": []}
    responses: list[DirectionResponse] = []
    for entry in manifest["participants"]:
        surveys = entry.get("surveys", {})
        for version, rel in sorted(surveys.get("comfort", {}).items()):
            maps[version].append(load_pressure_map(store.root / rel))
        for version, rel in sorted(surveys.get("quest", {}).items()):
            data = json.loads((store.root / rel).read_text())
            forms[version].append(QuestForm(
                participant=data["participant"],
                version=data["version"],
                scores=data["scores"],
            ))
        rel = surveys.get("directions")
        if rel:
            data = json.loads((store.root / rel).read_text())
            for version, direction in sorted(data["responses"].items()):
                responses.append(DirectionResponse(
                    participant=data["participant"],
                    version=version,
                    direction=direction,
                ))
    comfort = compare_versions(maps["v1"], maps["v2"]) \
        if maps["v1"] and maps["v2"] else []
    quest = quest_group_deltas(forms["v1"], forms["v2"]) \
        if forms["v1"] and forms["v2"] else []
    return comfort, quest, direction_tally(responses)


# ---------------------------------------------------------------------------
# Entry points

def analyze_session(root: str | Path) -> SessionAnalysis:
    """Analyze a complete session directory, writing per-trial derived CSVs
    and returning the group-level tables."""
    store = SessionStore(root)
    manifest = store.read_manifest()
    check_completeness(store, manifest)

    results = [_analyze_participant(store, entry)
               for entry in manifest["participants"]]

    static_rows = [r for res in results for r in res.static_rows]
    rom_rows = [r for res in results for r in res.rom_rows]
    pick_rows = [r for res in results for r in res.pick_rows]
    mdf_rows = [r for res in results for r in res.mdf_rows]

    families: dict[str, list] = {}
    families.update(_effort_families(static_rows, "endurance_s"))
    families.update(_effort_families(static_rows, "activation_pct"))
    if rom_rows:
        families["rom"] = _rom_family(rom_rows)
    if pick_rows:
        families["pick_place"] = _pick_family(pick_rows)

    comfort, quest, directions = _survey_tables(store, manifest)

    return SessionAnalysis(
        seed=manifest["seed"],
        participants=[p["id"] for p in manifest["participants"]],
        mvc_mv={res.pid: res.mvc for res in results},
        static_rows=static_rows,
        rom_rows=rom_rows,
        pick_rows=pick_rows,
        mdf_rows=mdf_rows,
        families=families,
        comfort=comfort,
        quest=quest,
        directions=directions,
    )


# ---------------------------------------------------------------------------
# Report export

def _csv_bytes(header: tuple[str, ...], rows: list[tuple]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def _stats_rows(families: dict[str, list]) -> list[tuple]:
    rows = []
    for family in sorted(families):
        for r in families[family]:
            if isinstance(r, DegenerateComparison):
                rows.append((family, r.label, r.n_pairs, "", "", "", "", "",
                             "", "", "degenerate", r.note))
            else:
                rows.append((
                    family, r.label, r.n_pairs, _fmt(r.median_delta),
                    _fmt(r.ci_low), _fmt(r.ci_high), _fmt(r.p_raw, 8),
                    _fmt(r.p_fdr, 8), _fmt(r.z, 4), _fmt(r.effect_r, 4),
                    r.method, "low_power_ci" if r.ci_low_power else "",
                ))
    return rows


STATS_HEADER = ("family", "label", "n", "median_delta", "ci_low", "ci_high",
                "p_raw", "p_fdr", "z", "r", "method", "note")
COMFORT_HEADER = ("region", "version", "mean_score", "rel_change_pct")


def export_report(root: str | Path, fmt: str,
                  analysis: SessionAnalysis | None = None) -> list[Path]:
    """Write the session report under root; returns the files written.

    The export is a deterministic function of the analysis tables, so
    re-exporting an unchanged session reproduces identical bytes.
    """
    store = SessionStore(root)
    if fmt not in ("csv", "json"):
        raise UnknownReportFormat(
            f"unknown report format {fmt!r}: expected 'csv' or 'json'")
    analysis = analysis or analyze_session(root)

    if fmt == "json":
        path = store.root / "report.json"
        path.write_text(json.dumps(analysis.report_dict(), indent=2,
                                   sort_keys=True) + "\n")
        return [path]

    outdir = store.root / "report"
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, header: tuple[str, ...], rows: list[tuple]) -> None:
        path = outdir / name
        path.write_bytes(_csv_bytes(header, rows))
        written.append(path)

    emit("endurance.csv",
         ("participant", "trial_id", "version", "power", "plane",
          "endurance_s", "stop_reason", "endurance_rig_s"),
         [(r.participant, r.trial_id, r.version, r.power, r.plane,
           _fmt(r.endurance_s, 3), r.stop_reason, _fmt(r.endurance_rig_s, 3))
          for r in analysis.static_rows])
    emit("activation.csv",
         ("participant", "trial_id", "plane", "version", "power", "agonist",
          "median_activation_pct"),
         [(r.participant, r.trial_id, r.plane, r.version, r.power, r.agonist,
           _fmt(r.activation_pct, 3)) for r in analysis.static_rows])
    emit("mdf.csv",
         ("participant", "trial_id", "channel", "mdf_slope_pct_per_s",
          "mdf_delta_pct"),
         [(r["participant"], r["trial_id"], r["channel"],
           _fmt(r["mdf_slope_pct_per_s"]), _fmt(r["mdf_delta_pct"], 3))
          for r in analysis.mdf_rows])
    emit("rom.csv",
         ("participant", "trial_id", "version", "rom_deg", "reps_found",
          "arm_weight_supported"),
         [(r.participant, r.trial_id, r.version, _fmt(r.rom_deg, 3),
           r.reps_found, str(r.arm_weight_supported).lower())
          for r in analysis.rom_rows])
    emit("pick_place.csv",
         ("participant", "trial_id", "condition", "transfers_in_window"),
         [(r.participant, r.trial_id, r.condition, r.transfers_in_window)
          for r in analysis.pick_rows])
    comfort_rows = []
    for r in analysis.comfort:
        rel = "" if r.rel_change_pct is None else _fmt(r.rel_change_pct, 3)
        comfort_rows.append((r.region, "v1", _fmt(r.mean_v1, 4), ""))
        comfort_rows.append((r.region, "v2", _fmt(r.mean_v2, 4), rel))
    emit("comfort.csv", COMFORT_HEADER, comfort_rows)
    emit("quest.csv",
         ("item", "mean_delta_pct", "sem_delta_pct", "n", "n_zero_baseline"),
         [(q.item, _fmt(q.mean_pct, 3), _fmt(q.sem_pct, 3), q.n,
           q.n_zero_baseline) for q in analysis.quest])
    emit("directions.csv",
         ("version", "direction", "count"),
         [(v, d, c) for v in sorted(analysis.directions)
          for d, c in sorted(analysis.directions[v].items())])
    emit("stats.csv", STATS_HEADER, _stats_rows(analysis.families))
    return written
