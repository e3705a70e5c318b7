"""Synthetic speech/singing generators and the bundled mini corpus.

Signals are additive harmonic sums, so their F0 and spectral envelope are
known exactly and independently of the analysis/synthesis code.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio import CANONICAL_RATE, AudioClip, save_wav

# (centre Hz, bandwidth Hz) per vowel-like timbre
VOWELS = {
    "a": ((750, 90), (1200, 110), (2600, 160)),
    "i": ((300, 60), (2300, 120), (3000, 180)),
    "u": ((350, 70), (800, 90), (2400, 160)),
    "e": ((500, 70), (1800, 110), (2500, 160)),
}


def formant_gain(freqs, formants, tilt_db_per_octave=-6.0):
    """Amplitude response of a sum of resonances with a spectral tilt."""
    freqs = np.asarray(freqs, dtype=float)
    gain = np.zeros_like(freqs)
    for centre, bandwidth in formants:
        gain += 1.0 / np.sqrt(1.0 + ((freqs - centre) / bandwidth) ** 2)
    tilt = (np.maximum(freqs, 100.0) / 100.0) ** (tilt_db_per_octave / 6.02)
    return (gain + 0.02) * tilt


def harmonic_signal(f0_track, formants, fs=CANONICAL_RATE, amplitude=0.5):
    """Sum of harmonics following the per-sample ``f0_track`` (0 = silent).

    Harmonic amplitudes follow ``formants`` at their instantaneous frequency.
    """
    f0_track = np.asarray(f0_track, dtype=float)
    phase = 2 * np.pi * np.cumsum(f0_track) / fs
    out = np.zeros_like(f0_track)
    top = np.max(f0_track) if f0_track.size else 0.0
    if top <= 0:
        return out
    for k in range(1, int(0.45 * fs / np.min(f0_track[f0_track > 0])) + 1):
        freq = k * f0_track
        audible = (freq > 0) & (freq < 0.45 * fs)
        if not audible.any():
            break
        out += np.where(audible, formant_gain(freq, formants) * np.sin(k * phase), 0.0)
    peak = np.max(np.abs(out))
    return out * (amplitude / peak) if peak > 0 else out


def speech_like(duration_s=1.0, mean_f0=120.0, vowels="aiue", seed=0, fs=CANONICAL_RATE):
    """Declining, wobbling pitch over a sequence of vowels, with short pauses.

    Returns ``(samples, f0_track)``; the track is 0 in the pauses.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    wobble = 0.08 * np.sin(2 * np.pi * rng.uniform(1.5, 3.0) * t + rng.uniform(0, 2 * np.pi))
    f0 = mean_f0 * (1.1 - 0.2 * t / duration_s + wobble)
    bounds = np.linspace(0, n, len(vowels) + 1).astype(int)
    out = np.zeros(n)
    gap = int(0.03 * fs)
    for v, a, b in zip(vowels, bounds[:-1], bounds[1:]):
        track = np.zeros(n)
        track[a:b - gap] = f0[a:b - gap]
        seg = harmonic_signal(track, VOWELS[v], fs)
        ramp = np.minimum(1.0, np.minimum(np.arange(n) - a + 1, b - gap - np.arange(n)) / (0.01 * fs))
        out += seg * np.clip(ramp, 0.0, 1.0)
        f0[b - gap:b] = 0.0
    return out * 0.5 / np.max(np.abs(out)), f0


def sung_like(duration_s=1.0, notes_hz=(220.0, 247.0, 262.0, 294.0), vibrato=0.03,
              vibrato_hz=5.5, seed=0, fs=CANONICAL_RATE):
    """Legato melody with vibrato on an open vowel. Returns ``(samples, f0_track)``."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    idx = np.minimum((t / duration_s * len(notes_hz)).astype(int), len(notes_hz) - 1)
    base = np.asarray(notes_hz, dtype=float)[idx]
    # smooth note transitions over ~30 ms
    kernel = np.hanning(int(0.03 * fs))
    base = np.convolve(np.pad(base, len(kernel), mode="edge"), kernel / kernel.sum(),
                       mode="same")[len(kernel):-len(kernel)]
    f0 = base * (1 + vibrato * np.sin(2 * np.pi * vibrato_hz * t + rng.uniform(0, 2 * np.pi)))
    return harmonic_signal(f0, VOWELS["a"], fs, amplitude=0.6), f0


MINI_SPEECH = (
    ("utt_a", "male", 115.0, "aiue", "the quick brown fox"),
    ("utt_b", "female", 210.0, "eaui", "jumps over the lazy dog"),
    ("utt_c", "male", 135.0, "uaie", "sing me a song"),
)
MINI_DONORS = (
    ("bass", "male", (110.0, 123.0, 131.0, 147.0)),
    ("tenor", "male", (220.0, 247.0, 262.0, 294.0)),
    ("alto", "female", (196.0, 220.0, 247.0, 262.0)),
    ("soprano", "female", (392.0, 440.0, 494.0, 523.0)),
)


def write_mini_corpus(directory, duration_s=1.0) -> dict:
    """Write 3 speech utterances, 4 donors and both manifests under ``directory``.

    Returns paths: ``donor_manifest``, ``manifest``, ``output_dir``.
    """
    root = Path(directory)
    (root / "speech").mkdir(parents=True, exist_ok=True)
    (root / "donors").mkdir(parents=True, exist_ok=True)
    donor_lines = []
    for i, (donor_id, gender, notes) in enumerate(MINI_DONORS):
        samples, _ = sung_like(duration_s, notes, seed=100 + i)
        save_wav(AudioClip(samples, CANONICAL_RATE), root / "donors" / f"{donor_id}.wav")
        donor_lines.append(f"{donor_id}\t{gender}\tdonors/{donor_id}.wav")
    speech_lines = []
    for i, (utt, gender, f0, vowels, text) in enumerate(MINI_SPEECH):
        samples, _ = speech_like(duration_s, f0, vowels, seed=i)
        save_wav(AudioClip(samples, CANONICAL_RATE), root / "speech" / f"{utt}.wav")
        speech_lines.append(f"{utt}\tspeech/{utt}.wav\t{gender}\t{text}\tout/{utt}.wav")
    (root / "donors.tsv").write_text("\n".join(donor_lines) + "\n", encoding="utf-8")
    (root / "manifest.tsv").write_text("\n".join(speech_lines) + "\n", encoding="utf-8")
    return {"donor_manifest": root / "donors.tsv", "manifest": root / "manifest.tsv",
            "output_dir": root / "out"}
