"""Pitch-adaptive spectral envelope estimation.

Per frame: power spectrum under a Hann window three pitch periods long, low
band folded back around F0, rectangular smoothing over 2*F0/3, then cepstral
liftering that keeps quefrencies below one pitch period.
"""
from __future__ import annotations

import numpy as np

from ..audio import AudioClip, frame_grid_for
from ..exceptions import AnalysisError
from ..params import ENVELOPE_FLOOR, AnalysisConfig, F0Contour, SpectralEnvelope
from .f0 import check_analyzable

DEFAULT_F0_HZ = 160.0
_COMPENSATION_Q0 = -0.15


def check_grid(clip: AudioClip, f0: F0Contour, config: AnalysisConfig) -> None:
    expected = frame_grid_for(clip, config.frame_period_ms)
    if f0.grid != expected:
        raise AnalysisError(f"F0 grid {f0.grid} does not match clip grid {expected}")


def frame_f0(f0: F0Contour, config: AnalysisConfig, default: float = DEFAULT_F0_HZ) -> np.ndarray:
    """F0 used to size per-frame analysis; unvoiced frames get ``default``."""
    values = np.where(f0.f0_hz > 0, f0.f0_hz, default)
    # the window must fit in the FFT
    lowest = 3.0 * f0.grid.sample_rate_hz / config.fft_size
    return np.maximum(values, lowest)


def segment(x: np.ndarray, centre: int, half: int) -> np.ndarray:
    """Samples ``centre-half .. centre+half`` with zeros outside the signal."""
    lo, hi = centre - half, centre + half + 1
    if lo >= 0 and hi <= x.shape[0]:
        return x[lo:hi].copy()
    out = np.zeros(hi - lo)
    src_lo, src_hi = max(lo, 0), min(hi, x.shape[0])
    if src_hi > src_lo:
        out[src_lo - lo:src_hi - lo] = x[src_lo:src_hi]
    return out


def _windowed_power(x, centre, f0, fs, fft_size):
    half = int(round(1.5 * fs / f0))
    half = min(half, fft_size // 2 - 1)
    t = np.arange(-half, half + 1) / fs
    window = 0.5 * np.cos(np.pi * t * f0 / 1.5) + 0.5
    window /= np.sqrt(np.sum(window ** 2))
    seg = segment(x, centre, half)
    seg = (seg - np.sum(seg * window) / np.sum(window)) * window
    return np.abs(np.fft.rfft(seg, fft_size)) ** 2


def _fold_low_band(power, f0, freqs):
    # mirror the region below F0 about F0 so the DC dip does not drag the envelope
    low = freqs < f0
    mirrored = np.interp(f0 - freqs[low], freqs, power)
    out = power.copy()
    out[low] += mirrored
    return out


def _smooth(power, width, freqs):
    """Rectangular moving average of ``width`` Hz with mirrored edges."""
    df = freqs[1] - freqs[0]
    n = power.shape[0]
    pad = int(np.ceil(width / df)) + 2
    ext = np.concatenate([power[pad:0:-1], power, power[-2:-pad - 2:-1]])
    ext_f = (np.arange(ext.shape[0]) - pad) * df
    # integral on cell edges, then difference of the interpolated integral
    cum = np.concatenate([[0.0], np.cumsum(ext) * df])
    edges = ext_f[0] - df / 2 + np.arange(cum.shape[0]) * df
    upper = np.interp(freqs[:n] + width / 2, edges, cum)
    lower = np.interp(freqs[:n] - width / 2, edges, cum)
    return (upper - lower) / width


def _lifter(log_power, f0, fs, fft_size):
    cep = np.fft.irfft(log_power, fft_size)
    q = np.arange(fft_size // 2 + 1) / fs
    arg = np.pi * f0 * q
    smoothing = np.ones_like(q)
    smoothing[1:] = np.sin(arg[1:]) / arg[1:]
    compensation = (1 - 2 * _COMPENSATION_Q0) + 2 * _COMPENSATION_Q0 * np.cos(2 * np.pi * q * f0)
    lifter = smoothing * compensation
    lifter[q > 1.0 / f0] = 0.0
    full = np.concatenate([lifter, lifter[-2:0:-1]])
    return np.fft.rfft(cep * full).real


def estimate_envelope(clip: AudioClip, f0: F0Contour,
                      config: AnalysisConfig | None = None) -> SpectralEnvelope:
    config = config or AnalysisConfig()
    check_analyzable(clip, config)
    check_grid(clip, f0, config)
    fs, n_fft = clip.sample_rate_hz, config.fft_size
    freqs = np.arange(n_fft // 2 + 1) * fs / n_fft
    x = clip.samples
    f0_used = frame_f0(f0, config)
    centres = np.round(f0.grid.times * fs).astype(int)
    bins = np.full((f0.grid.frame_count, n_fft // 2 + 1), ENVELOPE_FLOOR)
    for i, (centre, f) in enumerate(zip(centres, f0_used)):
        power = _windowed_power(x, centre, f, fs, n_fft)
        if not np.any(power > 0):
            continue
        power = _smooth(_fold_low_band(power, f, freqs), 2.0 * f / 3.0, freqs)
        log_env = _lifter(np.log(np.maximum(power, ENVELOPE_FLOOR)), f, fs, n_fft)
        bins[i] = np.maximum(np.exp(log_env), ENVELOPE_FLOOR)
    return SpectralEnvelope(f0.grid, n_fft, bins)
