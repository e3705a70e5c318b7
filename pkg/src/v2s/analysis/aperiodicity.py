"""Band aperiodicity from the power left between harmonics.

A long Hann window (eight pitch periods) resolves the harmonic comb. The
segment is first time-warped so the local F0 is constant across it;
otherwise a gliding pitch smears upper harmonics over the gaps. In each
harmonic band, the mean power density between comb teeth estimates the
aperiodic density across the whole band. Aperiodicity is the ratio of
aperiodic to total power, both summed over a few neighbouring bands.
"""
from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import resample_poly

from ..audio import AudioClip
from ..params import APERIODICITY_FLOOR, AnalysisConfig, Aperiodicity, F0Contour
from .envelope import check_grid
from .f0 import check_analyzable

WINDOW_PERIODS = 8
# bands this far below the loudest band carry no measurable aperiodic power
DYNAMIC_RANGE_DB = 60.0
SMOOTHING_BINS = 5
BAND_SPAN = 5
# oversampling before fractional-delay reads, keeps interpolation error ~-50 dB
OVERSAMPLE = 4


def _cycle_count(f0: F0Contour, n: int, fs: int) -> np.ndarray:
    """Cumulative pitch cycles at each sample; F0 is linear between voiced
    frames and held flat across unvoiced gaps and the ends."""
    v = f0.voiced
    track = np.interp(np.arange(n) / fs, f0.grid.times[v], f0.f0_hz[v])
    return (np.cumsum(track) - track[0]) / fs


def _warped_segment(upsampled, cycles, centre, f, half, fs):
    """``2*half+1`` samples around ``centre`` on a time axis along which the
    pitch is constant at ``f``."""
    targets = cycles[centre] + np.arange(-half, half + 1) * f / fs
    positions = np.interp(targets, cycles, np.arange(cycles.shape[0]),
                          left=-1.0, right=-1.0)
    grid = np.arange(upsampled.shape[0])
    return np.interp(positions * OVERSAMPLE, grid, upsampled, left=0.0, right=0.0)


def _band_ratios(seg: np.ndarray, f0: float, fs: int):
    """Aperiodicity per harmonic band (index 0 is band 1)."""
    n_fft = 1 << int(np.ceil(np.log2(2 * seg.shape[0])))
    power = np.abs(np.fft.rfft(seg, n_fft)) ** 2
    freqs = np.arange(power.shape[0]) * fs / n_fft
    harmonic = np.maximum(np.round(freqs / f0), 1).astype(int)
    between = np.abs(freqs - harmonic * f0) > f0 / 4.0
    n_bands = harmonic[-1]
    total = np.bincount(harmonic - 1, weights=power, minlength=n_bands)
    count = np.bincount(harmonic - 1, minlength=n_bands)
    noise = np.bincount(harmonic - 1, weights=power * between, minlength=n_bands)
    noise_count = np.bincount(harmonic - 1, weights=between.astype(float), minlength=n_bands)
    # aperiodic power of a band: inter-harmonic density spread over the whole band
    aperiodic = np.where(noise_count > 0, noise / np.maximum(noise_count, 1) * count, total)
    # energy-weighted over neighbouring bands, so empty bands follow loud neighbours
    kernel = np.ones(BAND_SPAN)
    aperiodic = np.convolve(aperiodic, kernel, mode="same")
    total = np.convolve(total, kernel, mode="same")
    floor = total.max() * 10.0 ** (-DYNAMIC_RANGE_DB / 10.0)
    if floor <= 0:
        return np.ones(n_bands)
    return np.clip(aperiodic / np.maximum(total, floor), 0.0, 1.0)


def estimate_aperiodicity(clip: AudioClip, f0: F0Contour,
                          config: AnalysisConfig | None = None) -> Aperiodicity:
    config = config or AnalysisConfig()
    check_analyzable(clip, config)
    check_grid(clip, f0, config)
    fs, n_fft = clip.sample_rate_hz, config.fft_size
    out_freqs = np.arange(n_fft // 2 + 1) * fs / n_fft
    bins = np.ones((f0.grid.frame_count, n_fft // 2 + 1))
    n = len(clip)
    centres = np.minimum(np.round(f0.grid.times * fs).astype(int), n - 1)
    voiced = np.flatnonzero(f0.voiced)
    if voiced.size:
        upsampled = resample_poly(clip.samples, OVERSAMPLE, 1)
        cycles = _cycle_count(f0, n, fs)
    for i in voiced:
        f = f0.f0_hz[i]
        half = int(round(WINDOW_PERIODS / 2 * fs / f))
        window = np.hanning(2 * half + 1)
        seg = _warped_segment(upsampled, cycles, centres[i], f, half, fs)
        seg = (seg - seg.mean()) * window
        ratios = _band_ratios(seg, f, fs)
        band = np.clip(np.round(out_freqs / f).astype(int), 1, ratios.shape[0]) - 1
        smoothed = uniform_filter1d(ratios[band], SMOOTHING_BINS, mode="nearest")
        bins[i] = np.clip(smoothed, APERIODICITY_FLOOR, 1.0)
    return Aperiodicity(f0.grid, n_fft, bins)
