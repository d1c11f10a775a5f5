"""Joint angles from absolute segment orientations, plus range-of-motion extraction.

Conventions: world X forward, Y left, Z up; quaternions are (w, x, y, z)
unit quaternions rotating local into world coordinates; every segment's
longitudinal axis points along local -Z (toward the distal end when the
limb hangs at rest).  Angles are reported in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SEGMENT_LONG_AXIS = np.array([0.0, 0.0, -1.0])
TORSO_FORWARD_AXIS = np.array([1.0, 0.0, 0.0])

# Below this elevation the arm is too close to vertical for the plane-of
# -elevation to be numerically meaningful; the azimuth is reported as NaN.
AZIMUTH_GATE_DEG = 15.0


class DegenerateQuaternion(ValueError):
    pass


class NoRepetitionsFound(ValueError):
    pass


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < 1e-6 or not np.isfinite(n):
        raise DegenerateQuaternion(f"quaternion norm {n} too small to normalize")
    return q / n


def quat_multiply(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([w, -x, -y, -z])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = quat_normalize(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    half = angle_rad / 2.0
    return np.concatenate(([math.cos(half)], math.sin(half) * axis))


def segment_axis(q) -> np.ndarray:
    """World-frame longitudinal axis of a segment with orientation q."""
    return quat_to_matrix(q) @ SEGMENT_LONG_AXIS


@dataclass(frozen=True, slots=True)
class JointAngles:
    """One sample of the derived joint angles; azimuth is NaN when gated."""

    elevation_deg: float
    azimuth_deg: float
    elbow_deg: float
    torso_yaw_deg: float


def _clamped_acos_deg(c: float) -> float:
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def shoulder_elevation_deg(q_upper_arm) -> float:
    """Angle of the upper arm from vertical-down: 0 at rest, 90 horizontal."""
    u = segment_axis(q_upper_arm)
    return _clamped_acos_deg(-u[2])


def shoulder_azimuth_deg(q_torso, q_upper_arm, side: str = "right") -> float:
    """Plane of elevation in the torso frame: 0 forward, +90 lateral.

    Lateral is -Y for the right arm and +Y for the left, so abduction is
    positive for whichever side carries the sensors.  NaN below the
    elevation gate.
    """
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    u_world = segment_axis(q_upper_arm)
    u_torso = quat_to_matrix(q_torso).T @ u_world
    horiz = math.hypot(u_torso[0], u_torso[1])
    vert = -u_torso[2]
    if math.degrees(math.atan2(horiz, vert)) < AZIMUTH_GATE_DEG:
        return math.nan
    sign = -1.0 if side == "right" else 1.0
    return math.degrees(math.atan2(sign * u_torso[1], u_torso[0]))


def elbow_flexion_deg(q_upper_arm, q_forearm) -> float:
    """Angle between upper arm and forearm axes: 0 fully extended."""
    return _clamped_acos_deg(
        float(np.dot(segment_axis(q_upper_arm), segment_axis(q_forearm)))
    )


def torso_yaw_deg(q_torso) -> float:
    """Heading of the torso forward axis in the world horizontal plane."""
    f = quat_to_matrix(q_torso) @ TORSO_FORWARD_AXIS
    return math.degrees(math.atan2(f[1], f[0]))


def joint_angles(q_torso, q_upper_arm, q_forearm, side: str = "right",
                 yaw_ref_deg: float = 0.0) -> JointAngles:
    """All four derived angles for one IMU sample.

    yaw_ref_deg is the torso heading captured at trial start; the reported
    turn is relative to it and wrapped to (-180, 180].
    """
    yaw = torso_yaw_deg(q_torso) - yaw_ref_deg
    yaw = (yaw + 180.0) % 360.0 - 180.0
    if yaw == -180.0:
        yaw = 180.0
    return JointAngles(
        elevation_deg=shoulder_elevation_deg(q_upper_arm),
        azimuth_deg=shoulder_azimuth_deg(q_torso, q_upper_arm, side),
        elbow_deg=elbow_flexion_deg(q_upper_arm, q_forearm),
        torso_yaw_deg=yaw,
    )


@dataclass(frozen=True, slots=True)
class JointAngleSeries:
    """Derived joint angles for a whole trial, one array per channel."""

    elevation_deg: np.ndarray
    azimuth_deg: np.ndarray
    elbow_deg: np.ndarray
    torso_yaw_deg: np.ndarray


def _rows_normalized(q, what: str) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[1] != 4:
        raise ValueError(f"{what} must have shape (n, 4)")
    n = np.linalg.norm(q, axis=1)
    bad = ~np.isfinite(n) | (n < 1e-6)
    if bad.any():
        raise DegenerateQuaternion(
            f"{what}: {int(bad.sum())} quaternions too small to normalize")
    return q / n[:, None]


def _rotate_rows(q: np.ndarray, v) -> np.ndarray:
    """Rotate v (one vector, or one per row) by each row quaternion."""
    vec = q[:, 1:]
    w = q[:, :1]
    v = np.broadcast_to(np.asarray(v, dtype=float), vec.shape)
    t = 2.0 * np.cross(vec, v)
    return v + w * t + np.cross(vec, t)


def joint_angles_batch(q_torso, q_upper_arm, q_forearm, side: str = "right",
                       yaw_ref_deg: float = 0.0) -> JointAngleSeries:
    """Vectorized joint_angles over (n, 4) quaternion arrays.

    Sample k of every output equals joint_angles() on row k.
    """
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    qt = _rows_normalized(q_torso, "q_torso")
    qa = _rows_normalized(q_upper_arm, "q_upper_arm")
    qf = _rows_normalized(q_forearm, "q_forearm")

    u_arm = _rotate_rows(qa, SEGMENT_LONG_AXIS)
    u_fore = _rotate_rows(qf, SEGMENT_LONG_AXIS)
    elevation = np.degrees(np.arccos(np.clip(-u_arm[:, 2], -1.0, 1.0)))

    # express the arm axis in the torso frame via conjugate rotation
    qt_conj = qt * np.array([1.0, -1.0, -1.0, -1.0])
    u_t = _rotate_rows(qt_conj, u_arm)
    horiz = np.hypot(u_t[:, 0], u_t[:, 1])
    vert = -u_t[:, 2]
    gated = np.degrees(np.arctan2(horiz, vert)) < AZIMUTH_GATE_DEG
    sign = -1.0 if side == "right" else 1.0
    azimuth = np.degrees(np.arctan2(sign * u_t[:, 1], u_t[:, 0]))
    azimuth[gated] = np.nan

    elbow = np.degrees(np.arccos(np.clip(
        np.einsum("ni,ni->n", u_arm, u_fore), -1.0, 1.0)))

    fwd = _rotate_rows(qt, TORSO_FORWARD_AXIS)
    yaw = np.degrees(np.arctan2(fwd[:, 1], fwd[:, 0])) - yaw_ref_deg
    yaw = (yaw + 180.0) % 360.0 - 180.0
    yaw[yaw == -180.0] = 180.0

    return JointAngleSeries(elevation, azimuth, elbow, yaw)


def unwrap_deg(series) -> np.ndarray:
    """Unwrap a degree series across the +/-180 seam, passing NaN through."""
    vals = np.asarray(series, dtype=float)
    out = vals.copy()
    finite = np.isfinite(vals)
    if finite.sum() >= 2:
        out[finite] = np.degrees(np.unwrap(np.radians(vals[finite])))
    return out


@dataclass(frozen=True, slots=True)
class RomSegment:
    """One repetition: extended to the motion valleys on either side."""

    start_s: float
    end_s: float
    rom_deg: float
    peak_deg: float


def segment_rom(
    t_s,
    excursion_deg,
    threshold_deg: float = 10.0,
    min_dwell_s: float = 0.5,
) -> list[RomSegment]:
    """Split an excursion trace into repetitions and report each one's range.

    A repetition is a contiguous run above threshold_deg that lasts at
    least min_dwell_s.  Each accepted run is then widened to the local
    minima separating it from its neighbours (or to the trace ends), so
    the reported range covers the full rise and fall, not only the part
    above the threshold.  NaN samples never start or extend a run.
    """
    t = np.asarray(t_s, dtype=float)
    x = np.asarray(excursion_deg, dtype=float)
    if t.shape != x.shape or t.ndim != 1:
        raise ValueError("t_s and excursion_deg must be 1-D and equal length")
    above = np.isfinite(x) & (x > threshold_deg)
    runs: list[tuple[int, int]] = []  # inclusive index ranges
    i = 0
    n = len(x)
    while i < n:
        if above[i]:
            j = i
            while j + 1 < n and above[j + 1]:
                j += 1
            if t[j] - t[i] >= min_dwell_s:
                runs.append((i, j))
            i = j + 1
        else:
            i += 1
    if not runs:
        raise NoRepetitionsFound(
            f"no excursion above {threshold_deg:g} deg lasting {min_dwell_s:g} s")

    def valley(lo: int, hi: int) -> int:
        seg = x[lo: hi + 1]
        if np.all(np.isnan(seg)):
            return lo
        return lo + int(np.nanargmin(seg))

    segments = []
    for k, (i0, i1) in enumerate(runs):
        lo = 0 if k == 0 else valley(runs[k - 1][1], i0)
        hi = n - 1 if k == len(runs) - 1 else valley(i1, runs[k + 1][0])
        window = x[lo: hi + 1]
        rom = float(np.nanmax(window) - np.nanmin(window))
        segments.append(
            RomSegment(
                start_s=float(t[lo]),
                end_s=float(t[hi]),
                rom_deg=rom,
                peak_deg=float(np.nanmax(window)),
            )
        )
    return segments
