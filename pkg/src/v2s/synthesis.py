"""Pulse/noise excitation synthesis from vocoder parameters.

Every voiced pulse contributes a minimum-phase response shaped by the
periodic part of the frame spectrum; a continuous white-noise excitation is
cut into segments (one per pulse interval, fixed hops where unvoiced) and each
segment is filtered by the aperiodic part. Both streams are overlap-added.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .audio import AudioClip
from .exceptions import SynthesisError
from .params import VocoderParams, F0Contour

PEAK_LEVEL = 0.95
UNVOICED_HOP_S = 0.005
_QUIET = 1.0 / 32768.0


def _sample_f0(f0: F0Contour, n_samples: int, fs: int) -> np.ndarray:
    """Per-sample F0, linear between voiced frames, 0 where the nearest frame is unvoiced."""
    # single division keeps half-frame boundaries exact
    frame_pos = np.arange(n_samples) * 1000.0 / (fs * f0.grid.frame_period_ms)
    last = f0.grid.frame_count - 1
    nearest = np.clip(np.round(frame_pos).astype(int), 0, last)
    lo = np.clip(np.floor(frame_pos).astype(int), 0, last)
    hi = np.minimum(lo + 1, last)
    values = f0.f0_hz
    frac = frame_pos - lo
    both = (values[lo] > 0) & (values[hi] > 0)
    interp = values[lo] + (values[hi] - values[lo]) * frac
    out = np.where(both, interp, values[nearest])
    out[values[nearest] <= 0] = 0.0
    return out


def _voiced_runs(mask: np.ndarray):
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1))


def _pulse_times(sample_f0: np.ndarray, fs: int) -> np.ndarray:
    """Fractional sample positions where the accumulated phase completes a cycle.

    Each voiced run starts with a pulse on its first sample.
    """
    positions = []
    for start, stop in _voiced_runs(sample_f0 > 0):
        increments = sample_f0[start:stop] / fs
        phase = np.cumsum(increments) - increments[0]
        after = np.flatnonzero(np.diff(np.floor(phase)) > 0) + 1
        target = np.floor(phase[after])
        frac = (target - phase[after - 1]) / (phase[after] - phase[after - 1])
        positions.append(np.concatenate([[float(start)], start + after - 1 + frac]))
    if not positions:
        return np.zeros(0)
    return np.concatenate(positions)


def pulse_positions(f0: F0Contour, sample_rate_hz: int | None = None) -> np.ndarray:
    """Sample indices of glottal pulses over the synthesis span of ``f0``."""
    fs = sample_rate_hz or f0.grid.sample_rate_hz
    n_samples = int(round((f0.grid.frame_count - 1) * f0.grid.frame_period_ms / 1000.0 * fs))
    times = _pulse_times(_sample_f0(f0, max(n_samples, 0), fs), fs)
    return np.round(times).astype(np.int64)


def minimum_phase_spectrum(magnitude: np.ndarray, fft_size: int) -> np.ndarray:
    """Minimum-phase complex spectra for rows of one-sided ``magnitude``."""
    log_mag = np.log(np.maximum(magnitude, 1e-300))
    cep = np.fft.irfft(log_mag, fft_size, axis=-1)
    half = fft_size // 2
    cep[..., 1:half] *= 2.0
    cep[..., half + 1:] = 0.0
    return np.exp(np.fft.rfft(cep, axis=-1))


def _segments(sample_f0: np.ndarray, pulses: np.ndarray, fs: int):
    """(start, length, voiced) noise segments tiling the whole output."""
    voiced = sample_f0 > 0
    segs = []
    hop = max(1, int(round(UNVOICED_HOP_S * fs)))
    for start, stop in _voiced_runs(~voiced):
        segs.extend((a, min(hop, stop - a), False) for a in range(start, stop, hop))
    for start, stop in _voiced_runs(voiced):
        inside = pulses[np.searchsorted(pulses, start):np.searchsorted(pulses, stop)]
        bounds = np.append(inside, stop)
        segs.extend((int(a), int(b - a), True) for a, b in zip(bounds[:-1], bounds[1:]))
    segs.sort()
    return segs


def synthesize(params: VocoderParams, seed: int = 0, normalize: bool = True) -> AudioClip:
    """Render ``params`` to audio.

    With ``normalize`` the output peak is scaled to 0.95 unless the result is
    below one 16-bit quantization step everywhere.
    """
    grid = params.grid
    fs = grid.sample_rate_hz
    n_out = grid.duration_samples
    if n_out <= 0:
        raise SynthesisError("degenerate duration: need at least two frames")
    n_fft = params.fft_size
    envelope = params.envelope.bins
    aper = np.clip(params.aperiodicity.bins, 0.0, 1.0)

    sample_f0 = _sample_f0(params.f0, n_out, fs)
    times = _pulse_times(sample_f0, fs)
    pulses = np.floor(times).astype(np.int64)
    offsets = dict(zip(pulses.tolist(), (times - pulses).tolist()))
    frame_of = lambda pos: min(int(round(pos * 1000.0 / (fs * grid.frame_period_ms))),
                               grid.frame_count - 1)

    segments = _segments(sample_f0, pulses, fs)
    used = sorted({frame_of(a) for a, _, _ in segments})
    periodic_tf, aperiodic_ir = {}, {}
    if used:
        idx = np.array(used)
        per = minimum_phase_spectrum(np.sqrt(envelope[idx] * (1.0 - aper[idx])), n_fft)
        ape = np.fft.irfft(minimum_phase_spectrum(np.sqrt(envelope[idx] * aper[idx]),
                                                  n_fft), n_fft)
        for k, i in enumerate(used):
            periodic_tf[i] = per[k]
            aperiodic_ir[i] = ape[k]
    # linear phase for sub-sample pulse placement
    bin_phase = -2j * np.pi * np.arange(n_fft // 2 + 1) / n_fft

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n_out)
    out = np.zeros(n_out + 2 * n_fft)
    for start, length, voiced in segments:
        frame = frame_of(start)
        filtered = fftconvolve(noise[start:start + length], aperiodic_ir[frame])
        out[start:start + filtered.shape[0]] += filtered
        if voiced:
            # unit-power pulse train: amplitude sqrt(period) per pulse
            shifted = periodic_tf[frame] * np.exp(bin_phase * offsets[start])
            out[start:start + n_fft] += np.sqrt(length) * np.fft.irfft(shifted, n_fft)
    out = out[:n_out]

    if normalize:
        peak = np.max(np.abs(out))
        if peak >= _QUIET:
            out *= PEAK_LEVEL / peak
    return AudioClip(out, fs)
