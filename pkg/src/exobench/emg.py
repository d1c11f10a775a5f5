"""Surface EMG conditioning, normalization, and spectral fatigue metrics.

The chain is fixed: zero-phase 4th-order Butterworth band-pass 10-400 Hz,
50 Hz notch (Q = 30), then for amplitude work full-wave rectification and a
zero-phase 4th-order 10 Hz low-pass envelope.  Spectral fatigue runs on the
band-passed signal in 5 s epochs, each summarized by the median frequency
of an averaged two-window Hann periodogram.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

FS_EMG = 2000.0
BAND_HZ = (10.0, 400.0)
NOTCH_HZ = 50.0
NOTCH_Q = 30.0
ENVELOPE_CUTOFF_HZ = 10.0
FILTER_ORDER = 4

EPOCH_S = 5.0
SPECTRAL_WINDOW_S = 4.0
SPECTRAL_HOP_S = 1.0
HAMPEL_HALF_WINDOW = 25
HAMPEL_N_SIGMA = 3.0
_MAD_TO_SIGMA = 1.4826

MVC_TRIAL_COUNT = 3


class SignalTooShort(ValueError):
    pass


class WrongTrialCount(ValueError):
    pass


class ZeroMvc(ValueError):
    pass


class EmptySet(ValueError):
    pass


class WindowOutOfRange(ValueError):
    pass


class TooFewEpochs(ValueError):
    pass


def preprocess(x, fs: float = FS_EMG) -> np.ndarray:
    """Band-pass plus mains notch, both zero-phase; needs >= 1 s of signal."""
    x = np.asarray(x, dtype=float)
    if len(x) < fs:
        raise SignalTooShort(f"{len(x)} samples is under 1 s at fs = {fs:g}")
    sos = signal.butter(FILTER_ORDER, BAND_HZ, btype="bandpass", fs=fs, output="sos")
    y = signal.sosfiltfilt(sos, x)
    b, a = signal.iirnotch(NOTCH_HZ, NOTCH_Q, fs=fs)
    return signal.filtfilt(b, a, y)


def envelope(x, fs: float = FS_EMG) -> np.ndarray:
    """Linear envelope of an already-conditioned signal, clamped at zero."""
    rect = np.abs(np.asarray(x, dtype=float))
    b, a = signal.butter(FILTER_ORDER, ENVELOPE_CUTOFF_HZ, btype="low", fs=fs)
    return np.maximum(signal.filtfilt(b, a, rect), 0.0)


def compute_mvc(raw_trials, fs: float = FS_EMG) -> float:
    """Normalization reference from repeated maximal contractions.

    Exactly three raw trials; each runs through the identical
    preprocess + envelope chain and the reference is the mean of the three
    per-trial maxima.
    """
    trials = list(raw_trials)
    if len(trials) != MVC_TRIAL_COUNT or any(len(t) == 0 for t in trials):
        raise WrongTrialCount(
            f"need exactly {MVC_TRIAL_COUNT} non-empty trials, got "
            f"{[len(t) for t in trials]}")
    peaks = [float(np.max(envelope(preprocess(t, fs), fs))) for t in trials]
    return float(np.mean(peaks))


def normalize_emg(env, mvc: float) -> np.ndarray:
    """Envelope as percent of the maximal-contraction reference."""
    if not mvc > 0:
        raise ZeroMvc(f"MVC reference must be positive, got {mvc}")
    return 100.0 * np.asarray(env, dtype=float) / mvc


@dataclass(frozen=True, slots=True)
class ActivationWindow:
    """Shared comparison window: the shortest task duration across the
    conditions being compared, anchored at task start."""

    duration_s: float
    offset_s: float = 0.0

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("duration must be positive")


def activation_window(durations_s) -> ActivationWindow:
    durations = list(durations_s)
    if not durations:
        raise EmptySet("no task durations supplied")
    return ActivationWindow(duration_s=float(min(durations)), offset_s=0.0)


def median_activation(t_s, pct_mvc, window: ActivationWindow) -> float:
    """Sample median of the normalized envelope over the activation window."""
    t = np.asarray(t_s, dtype=float)
    v = np.asarray(pct_mvc, dtype=float)
    if t.shape != v.shape or t.ndim != 1 or len(t) == 0:
        raise ValueError("t_s and pct_mvc must be 1-D, equal length, non-empty")
    dt = float(np.median(np.diff(t))) if len(t) > 1 else 0.0
    end = window.offset_s + window.duration_s
    if end > t[-1] + dt + 1e-9:
        raise WindowOutOfRange(
            f"window ends at {end:g} s but signal ends at {t[-1]:g} s")
    mask = (t >= window.offset_s) & (t <= end + 1e-12)
    return float(np.median(v[mask]))


def _periodogram(x, fs: float) -> tuple[np.ndarray, np.ndarray]:
    n = len(x)
    w = signal.get_window("hann", n)
    spec = np.abs(np.fft.rfft(x * w)) ** 2
    return np.fft.rfftfreq(n, 1.0 / fs), spec


def median_frequency(freqs, power) -> float:
    """Lowest frequency bin at which cumulative power reaches half the total."""
    p = np.asarray(power, dtype=float)
    total = p.sum()
    if not total > 0:
        raise ValueError("spectrum has no power")
    idx = int(np.searchsorted(np.cumsum(p), total / 2.0))
    return float(np.asarray(freqs)[idx])


def mdf_series(x, fs: float = FS_EMG, window: ActivationWindow | None = None
               ) -> tuple[np.ndarray, np.ndarray]:
    """Per-epoch median frequency of a conditioned signal.

    Epochs are back-to-back 5 s blocks inside the activation window (the
    whole signal when window is None).  Within each epoch, two 4 s Hann
    windows offset by 1 s are periodogram-averaged before the median
    split, trading a little variance for the short record.  Returns
    (epoch centers in seconds from signal start, MDF in Hz).
    """
    x = np.asarray(x, dtype=float)
    offset = 0.0
    if window is not None:
        i0 = int(round(window.offset_s * fs))
        i1 = i0 + int(round(window.duration_s * fs))
        if i1 > len(x):
            raise WindowOutOfRange("activation window extends past the signal")
        x = x[i0:i1]
        offset = window.offset_s
    n_epoch = int(round(EPOCH_S * fs))
    n_win = int(round(SPECTRAL_WINDOW_S * fs))
    hop = int(round(SPECTRAL_HOP_S * fs))
    n_epochs = len(x) // n_epoch
    if n_epochs == 0:
        raise SignalTooShort(f"signal shorter than one {EPOCH_S:.0f} s epoch")
    centers = np.empty(n_epochs)
    mdfs = np.empty(n_epochs)
    for k in range(n_epochs):
        seg = x[k * n_epoch: (k + 1) * n_epoch]
        acc = None
        freqs = None
        for start in range(0, n_epoch - n_win + 1, hop):
            freqs, spec = _periodogram(seg[start: start + n_win], fs)
            acc = spec if acc is None else acc + spec
        centers[k] = offset + (k + 0.5) * EPOCH_S
        mdfs[k] = median_frequency(freqs, acc)
    return centers, mdfs


def hampel(x, half_window: int = HAMPEL_HALF_WINDOW, n_sigma: float = HAMPEL_N_SIGMA
           ) -> np.ndarray:
    """Median/MAD despiking with edge-truncated windows.

    A sample further than n_sigma * 1.4826 * MAD from its window median is
    replaced by that median.  When the window MAD is zero, any deviation
    from the median counts as an outlier.
    """
    x = np.asarray(x, dtype=float)
    out = x.copy()
    n = len(x)
    for i in range(n):
        lo = max(0, i - half_window)
        hi = min(n, i + half_window + 1)
        window = x[lo:hi]
        med = np.median(window)
        mad = np.median(np.abs(window - med))
        if mad == 0:
            if x[i] != med:
                out[i] = med
        elif abs(x[i] - med) > n_sigma * _MAD_TO_SIGMA * mad:
            out[i] = med
    return out


def normalize_to_first(values) -> np.ndarray:
    """Scale a series so its first element is 100."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        raise ValueError("empty series")
    if not v[0] > 0:
        raise ValueError("first element must be positive to normalize")
    return 100.0 * v / v[0]


def ols_slope(t, y) -> float:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 2:
        raise TooFewEpochs("slope needs at least two points")
    return float(np.polyfit(t, y, 1)[0])


def mdf_delta_pct(mdf_hz) -> float:
    """Relative start-to-end shift: medians of the first and last two epochs."""
    v = np.asarray(mdf_hz, dtype=float)
    if len(v) < 2:
        raise TooFewEpochs("need at least two epochs")
    first = np.median(v[:2])
    last = np.median(v[-2:])
    if first == 0:
        raise ValueError("first-epoch median frequency is zero")
    return float(100.0 * (last - first) / first)


@dataclass(frozen=True, slots=True)
class MdfSeries:
    """Spectral fatigue summary of one channel over one trial."""

    epoch_centers_s: tuple[float, ...]
    mdf_hz: tuple[float, ...]
    normalized_pct: tuple[float, ...]
    slope_pct_per_s: float
    delta_pct: float


def mdf_trend(conditioned, fs: float = FS_EMG,
              window: ActivationWindow | None = None) -> MdfSeries:
    """Full fatigue chain: epoch MDFs, despike, normalize, slope and shift."""
    centers, mdfs = mdf_series(conditioned, fs, window)
    if len(mdfs) < 2:
        raise TooFewEpochs(f"only {len(mdfs)} epoch in the window")
    cleaned = hampel(mdfs)
    norm = normalize_to_first(cleaned)
    return MdfSeries(
        epoch_centers_s=tuple(float(c) for c in centers),
        mdf_hz=tuple(float(m) for m in cleaned),
        normalized_pct=tuple(float(p) for p in norm),
        slope_pct_per_s=ols_slope(centers, norm),
        delta_pct=mdf_delta_pct(cleaned),
    )
