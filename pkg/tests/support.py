"""Shared test helpers: independently coded oracles and frame factories.

The statistical oracles here deliberately avoid the package's own
algorithms (enumeration instead of dynamic programming, a quadratic
step-up instead of the running-minimum pass) so agreement between the two
is evidence, not tautology.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import stats as sps

from exobench.telemetry import (
    CtrlPayload,
    EmgPayload,
    EventPayload,
    ImuPayload,
    PressurePayload,
    StreamId,
    TelemetryFrame,
    EMG_BLOCK,
)

# Eight-pair assisted/unassisted endurance sample whose differences are
# all positive: the canonical full-concordance Wilcoxon fixture.
EIGHT_ON = [65.2, 71.3, 58.4, 69.9, 74.1, 61.0, 66.6, 70.2]
EIGHT_OFF = [44.0, 52.1, 40.2, 47.7, 55.8, 43.9, 48.0, 51.3]

# ---------------------------------------------------------------------------
# Statistical oracles


def exact_wilcoxon_p(x, y) -> float:
    """Two-sided exact signed-rank p by brute-force sign enumeration.

    Walks every one of the 2^n sign assignments over the ranked absolute
    differences (zeros dropped, ties average-ranked), so it is exact for
    tied data as well.  Practical through n ~ 16.
    """
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    nz = d[d != 0]
    ranks = sps.rankdata(np.abs(nz))
    w_obs = float(ranks[nz > 0].sum())
    n = len(nz)
    w_values = np.array([
        sum(r for r, bit in zip(ranks, pattern) if bit)
        for pattern in itertools.product((0, 1), repeat=n)
    ])
    eps = 1e-9
    p_le = np.mean(w_values <= w_obs + eps)
    p_ge = np.mean(w_values >= w_obs - eps)
    return float(min(1.0, 2.0 * min(p_le, p_ge)))


def signed_rank_cdf(n: int, w: float) -> float:
    """P(W+ <= w) under the untied exact null, by enumeration."""
    w_values = [
        sum(r for r, bit in zip(range(1, n + 1), pattern) if bit)
        for pattern in itertools.product((0, 1), repeat=n)
    ]
    return sum(1 for v in w_values if v <= w + 1e-9) / 2.0 ** n


def bh_adjust_oracle(p_values) -> np.ndarray:
    """Quadratic-time Benjamini-Hochberg step-up from the definition."""
    p = np.asarray(p_values, dtype=float)
    m = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    for i in range(m):
        candidates = [p[order[j]] * m / (j + 1) for j in range(i, m)]
        adjusted[order[i]] = min(1.0, min(candidates))
    return adjusted


def hodges_lehmann_oracle(diffs, confidence: float = 0.95):
    """(point, lo, hi) from the textbook definition: median of Walsh
    averages, interval at the (c+1)-th order statistics from each end where
    c is the largest value with P(W <= c) <= alpha/2."""
    d = np.asarray(diffs, dtype=float)
    n = len(d)
    walsh = np.sort([
        (d[i] + d[j]) / 2.0 for i in range(n) for j in range(i, n)
    ])
    point = float(np.median(walsh))
    alpha = 1.0 - confidence
    c = -1
    while signed_rank_cdf(n, c + 1) <= alpha / 2.0:
        c += 1
    if c < 0:
        return point, float(walsh[0]), float(walsh[-1])
    return point, float(walsh[c]), float(walsh[len(walsh) - 1 - c])


# ---------------------------------------------------------------------------
# Telemetry frame factories


def random_unit_quat(rng: np.random.Generator) -> tuple:
    v = rng.normal(size=4)
    while np.linalg.norm(v) < 1e-3:
        v = rng.normal(size=4)
    v = v / np.linalg.norm(v)
    return tuple(float(c) for c in v)


def random_payload(rng: np.random.Generator, stream: StreamId):
    if stream == StreamId.IMU:
        return ImuPayload(
            q_torso=random_unit_quat(rng),
            q_upper_arm=random_unit_quat(rng),
            q_forearm=random_unit_quat(rng),
            calib=tuple(int(c) for c in rng.integers(0, 4, size=3)),
        )
    if stream == StreamId.PRESSURE:
        return PressurePayload(
            pressure_kpa=float(rng.uniform(0, 120)),
            setpoint_kpa=float(rng.uniform(0, 70)),
        )
    if stream == StreamId.EMG:
        vals = rng.normal(scale=1.2, size=3 * EMG_BLOCK)
        return EmgPayload(
            ad=tuple(float(v) for v in vals[:EMG_BLOCK]),
            md=tuple(float(v) for v in vals[EMG_BLOCK:2 * EMG_BLOCK]),
            pd=tuple(float(v) for v in vals[2 * EMG_BLOCK:]),
        )
    if stream == StreamId.CTRL:
        return CtrlPayload(mode=int(rng.integers(0, 3)),
                           valve_bits=int(rng.integers(0, 16)))
    return EventPayload(
        kind=str(rng.choice(["trial_start", "trial_stop", "block_transfer"])),
        data={"k": int(rng.integers(0, 1000))},
    )


def random_frame(rng: np.random.Generator,
                 stream: StreamId | None = None) -> TelemetryFrame:
    stream = stream or StreamId(int(rng.integers(1, 6)))
    return TelemetryFrame(
        stream_id=stream,
        seq=int(rng.integers(0, 2 ** 32)),
        timestamp_us=int(rng.integers(0, 2 ** 50)),
        payload=random_payload(rng, stream),
    )
