"""Filter-bank F0 estimation from event intervals.

Each channel low-passes the signal so that a fundamental lying between half
the channel cutoff and the cutoff comes out close to a sinusoid. Four event
series of that sinusoid (rising and falling zero crossings, peaks, dips) give
four period estimates per frame; their agreement measures how trustworthy the
channel's candidate is. A final pass unvoices short fragments cut off by F0
jumps, which is where octave slips live.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, fftconvolve, sosfiltfilt
from scipy.signal.windows import nuttall

from ..audio import CANONICAL_RATE, AudioClip, frame_grid_for
from ..exceptions import AnalysisError
from ..params import AnalysisConfig, F0Contour


PERIODICITY_FLOOR = 0.5
# contour fixing: largest relative F0 change between adjacent frames of one
# voiced segment; shorter segments than the floor-derived minimum are dropped
MAX_STEP = 0.1


@dataclass(frozen=True)
class F0Candidate:
    f0_hz: float
    reliability: float  # variance (Hz^2) of the four interval-based estimates

    def is_reliable(self, threshold: float) -> bool:
        return self.reliability <= (threshold * self.f0_hz) ** 2


def check_analyzable(clip: AudioClip, config: AnalysisConfig) -> None:
    if clip.sample_rate_hz != CANONICAL_RATE:
        raise AnalysisError(
            f"expected {CANONICAL_RATE} Hz audio, got {clip.sample_rate_hz} Hz")
    if len(clip) == 0:
        raise AnalysisError("clip is empty")
    if len(clip) < 2 * clip.sample_rate_hz / config.f0_floor_hz:
        raise AnalysisError("clip too short: need at least two periods of f0_floor")


def channel_cutoffs(config: AnalysisConfig) -> np.ndarray:
    """Geometrically spaced low-pass cutoffs over the search range."""
    n = config.channel_count
    if n == 1:
        return np.array([config.f0_ceil_hz])
    ratio = config.f0_ceil_hz / config.f0_floor_hz
    return config.f0_floor_hz * ratio ** (np.arange(n) / (n - 1))


def _remove_low_band(x: np.ndarray, fs: int, config: AnalysisConfig) -> np.ndarray:
    cutoff = min(50.0, 0.5 * config.f0_floor_hz)
    sos = butter(2, cutoff, btype="highpass", fs=fs, output="sos")
    return sosfiltfilt(sos, x)


def _lowpass(x: np.ndarray, fs: int, cutoff: float) -> np.ndarray:
    # Nuttall kernel spanning two cutoff periods: its main lobe ends at 2*cutoff,
    # so a fundamental in [cutoff/2, cutoff] passes with its harmonics suppressed
    half = max(1, int(round(fs / cutoff / 2.0)))
    kernel = nuttall(4 * half + 1)
    return fftconvolve(x, kernel / kernel.sum(), mode="same")


def _crossings(y: np.ndarray, rising: bool) -> np.ndarray:
    """Fractional sample positions where ``y`` crosses zero."""
    if rising:
        idx = np.flatnonzero((y[:-1] < 0) & (y[1:] >= 0))
    else:
        idx = np.flatnonzero((y[:-1] > 0) & (y[1:] <= 0))
    a, b = y[idx], y[idx + 1]
    return idx + a / (a - b)


def _interval_track(events: np.ndarray, fs: int, times: np.ndarray) -> np.ndarray:
    """F0 implied by successive event intervals, interpolated at ``times``.

    Frames outside the span covered by the intervals get NaN.
    """
    out = np.full(times.shape, np.nan)
    if events.shape[0] < 3:
        return out
    intervals = np.diff(events)
    centres = (events[:-1] + events[1:]) / 2.0 / fs
    freqs = fs / intervals
    inside = (times >= centres[0]) & (times <= centres[-1])
    out[inside] = np.interp(times[inside], centres, freqs)
    return out


def _channel_estimates(y: np.ndarray, fs: int, times: np.ndarray) -> np.ndarray:
    """Four interval-based F0 tracks, shape (4, n_frames)."""
    dy = np.diff(y)
    series = [
        _crossings(y, rising=True),
        _crossings(y, rising=False),
        _crossings(dy, rising=False) + 0.5,  # peaks
        _crossings(dy, rising=True) + 0.5,  # dips
    ]
    return np.stack([_interval_track(ev, fs, times) for ev in series])


def _frame_rms_db(x: np.ndarray, fs: int, times: np.ndarray, config: AnalysisConfig):
    half = int(round(fs / config.f0_floor_hz))
    power = np.concatenate([[0.0], np.cumsum(x * x)])
    centres = np.round(times * fs).astype(int)
    lo = np.clip(centres - half, 0, x.shape[0])
    hi = np.clip(centres + half + 1, 0, x.shape[0])
    count = np.maximum(hi - lo, 1)
    rms = np.sqrt((power[hi] - power[lo]) / count)
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(rms)


def _periodicity(x: np.ndarray, fs: int, times: np.ndarray, f0: np.ndarray) -> np.ndarray:
    """Normalized correlation of the signal with itself one period later, around
    each frame centre over at least 20 ms; best of the three integer lags
    nearest the period. Zero where ``f0`` is zero."""
    out = np.zeros(times.shape)
    n = x.shape[0]
    for i in np.flatnonzero(f0 > 0):
        period = fs / f0[i]
        width = max(int(2 * period), int(0.02 * fs))
        nearest = int(round(period))
        for lag in (nearest - 1, nearest, nearest + 1):
            start = int(round(times[i] * fs)) - (width + lag) // 2
            lo = max(start, 0)
            hi = min(start + width, n - lag)
            if hi - lo < lag:
                continue
            a, b = x[lo:hi], x[lo + lag:hi + lag]
            denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
            if denom > 0:
                out[i] = max(out[i], np.dot(a, b) / denom)
    return out


def _candidate_tables(clip: AudioClip, config: AnalysisConfig, times: np.ndarray,
                      x: np.ndarray | None = None):
    """Candidate F0 and variance per (channel, frame); NaN where out of band."""
    fs = clip.sample_rate_hz
    if x is None:
        x = _remove_low_band(clip.samples, fs, config)
    cutoffs = channel_cutoffs(config)
    f0 = np.full((cutoffs.shape[0], times.shape[0]), np.nan)
    var = np.full_like(f0, np.nan)
    for ch, cutoff in enumerate(cutoffs):
        y = _lowpass(x, fs, cutoff)
        est = _channel_estimates(y, fs, times)
        mean = est.mean(axis=0)
        # spread pooled over neighbouring periods exposes noise jitter
        step = 1.0 / cutoff
        pooled = np.concatenate([est] + [_channel_estimates(y, fs, times + k * step)
                                         for k in (-1, 1)])
        spread = pooled.var(axis=0)
        ok = (np.isfinite(mean) & (mean >= cutoff / 2.0) & (mean <= cutoff)
              & (mean >= config.f0_floor_hz) & (mean <= config.f0_ceil_hz))
        f0[ch, ok] = mean[ok]
        var[ch, ok] = spread[ok]
    return f0, var


def f0_candidates(clip: AudioClip, config: AnalysisConfig, frame_index: int):
    """Per-channel F0 candidates at one frame, one per channel in band."""
    check_analyzable(clip, config)
    grid = frame_grid_for(clip, config.frame_period_ms)
    if not 0 <= frame_index < grid.frame_count:
        raise IndexError(f"frame index {frame_index} outside 0..{grid.frame_count - 1}")
    times = grid.times[frame_index:frame_index + 1]
    level = _frame_rms_db(clip.samples, clip.sample_rate_hz, times, config)
    if level[0] < config.silence_floor_db:
        return []
    f0, var = _candidate_tables(clip, config, times)
    return [F0Candidate(float(f), float(v)) for f, v in zip(f0[:, 0], var[:, 0])
            if np.isfinite(f)]


def _select(f0: np.ndarray, var: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best candidate per frame by relative spread; ties go to the lower F0."""
    score = np.where(np.isfinite(f0), var / np.where(np.isfinite(f0), f0, 1.0) ** 2, np.inf)
    n_frames = f0.shape[1]
    best_f0 = np.zeros(n_frames)
    best_score = np.full(n_frames, np.inf)
    for ch in range(f0.shape[0]):
        s, f = score[ch], f0[ch]
        better = (s < best_score) | ((s == best_score) & np.isfinite(s) & (f < best_f0))
        best_score = np.where(better, s, best_score)
        best_f0 = np.where(better, f, best_f0)
    return best_f0, best_score


def min_segment_frames(config: AnalysisConfig) -> int:
    """Shortest kept voiced segment: about two f0_floor periods per side, odd."""
    return int(0.5 + 1000.0 / (config.frame_period_ms * config.f0_floor_hz)) * 2 + 1


def fix_contour(f0: np.ndarray, min_frames: int, max_step: float = MAX_STEP) -> np.ndarray:
    """Split voiced runs where F0 jumps by more than ``max_step`` (relative)
    and unvoice the pieces shorter than ``min_frames``.

    Octave slips and transition glitches show up as short fragments; genuine
    notes and pitch steps survive as long segments on either side of the jump.
    """
    f0 = f0.copy()
    voiced = f0 > 0
    jump = np.ones(f0.shape[0], dtype=bool)  # segment starts
    prev, cur = f0[:-1], f0[1:]
    jump[1:] = ~(voiced[:-1] & voiced[1:]
                 & (np.abs(cur - prev) <= max_step * np.minimum(cur, prev)))
    starts = np.flatnonzero(jump)
    ends = np.append(starts[1:], f0.shape[0])
    for a, b in zip(starts, ends):
        if voiced[a] and b - a < min_frames:
            f0[a:b] = 0.0
    return f0


def estimate_f0(clip: AudioClip, config: AnalysisConfig | None = None) -> F0Contour:
    config = config or AnalysisConfig()
    check_analyzable(clip, config)
    grid = frame_grid_for(clip, config.frame_period_ms)
    times = grid.times
    fs = clip.sample_rate_hz
    x = _remove_low_band(clip.samples, fs, config)
    f0, var = _candidate_tables(clip, config, times, x)
    best_f0, best_score = _select(f0, var)
    level = _frame_rms_db(clip.samples, fs, times, config)
    voiced = ((best_score <= config.voicing_reliability_threshold ** 2)
              & (level >= config.silence_floor_db))
    # consistent intervals alone let narrow-band noise through
    voiced &= _periodicity(x, fs, times, np.where(voiced, best_f0, 0.0)) >= PERIODICITY_FLOOR
    f0 = fix_contour(np.where(voiced, best_f0, 0.0), min_segment_frames(config))
    return F0Contour(grid, f0)
