"""Audio clips, WAV I/O, resampling and frame timing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .exceptions import AudioFormatError

CANONICAL_RATE = 16000


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono float signal in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip samples must be one-dimensional")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return (self.sample_rate_hz == other.sample_rate_hz
                and np.array_equal(self.samples, other.samples))


@dataclass(frozen=True)
class FrameGrid:
    frame_period_ms: float
    frame_count: int
    sample_rate_hz: int

    def __post_init__(self):
        if self.frame_period_ms <= 0:
            raise ValueError("frame_period_ms must be positive")
        if self.frame_count < 0:
            raise ValueError("frame_count must be non-negative")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def times(self) -> np.ndarray:
        """Frame centre times in seconds."""
        return np.arange(self.frame_count) * self.frame_period_ms / 1000.0

    @property
    def duration_samples(self) -> int:
        """Sample span covered by the grid, first to last frame centre."""
        return int(round((self.frame_count - 1) * self.frame_period_ms / 1000.0
                         * self.sample_rate_hz))


def frame_count_for(n_samples: int, sample_rate_hz: int, frame_period_ms: float) -> int:
    # tiny epsilon so exact multiples (1.0 s / 5 ms) are not lost to rounding
    ratio = n_samples * 1000.0 / (sample_rate_hz * frame_period_ms)
    return int(math.floor(ratio + 1e-9)) + 1


def frame_grid_for(clip: AudioClip, frame_period_ms: float = 5.0) -> FrameGrid:
    if frame_period_ms <= 0:
        raise ValueError("frame_period_ms must be positive")
    count = frame_count_for(len(clip), clip.sample_rate_hz, frame_period_ms)
    return FrameGrid(float(frame_period_ms), count, clip.sample_rate_hz)


def _to_float(data: np.ndarray) -> np.ndarray:
    kind = data.dtype
    if kind == np.uint8:
        out = (data.astype(np.float64) - 128.0) / 128.0
    elif kind == np.int16:
        out = data.astype(np.float64) / 32768.0
    elif kind == np.int32:
        # scipy left-justifies 24-bit samples into int32
        out = data.astype(np.float64) / 2147483648.0
    elif kind in (np.float32, np.float64):
        out = data.astype(np.float64)
    else:
        raise AudioFormatError(f"unsupported sample type {kind}")
    return out


def load_wav(path) -> AudioClip:
    """Read a linear-PCM or float WAV file as a mono clip.

    Multi-channel audio is averaged; values outside [-1, 1] are saturated.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        msg = str(exc)
        if "format" in msg.lower() and "unknown" in msg.lower():
            raise AudioFormatError(f"unsupported encoding in {path}: {msg}") from exc
        raise AudioFormatError(f"malformed WAV header in {path}: {msg}") from exc
    except (EOFError, OSError) as exc:
        raise AudioFormatError(f"malformed WAV file {path}: {exc}") from exc
    if data.ndim == 2:
        if not 1 <= data.shape[1] <= 2:
            raise AudioFormatError(f"unsupported channel count {data.shape[1]}")
        samples = _to_float(data).mean(axis=1)
    else:
        samples = _to_float(data)
    return AudioClip(np.clip(samples, -1.0, 1.0), int(rate))


def save_wav(clip: AudioClip, path) -> None:
    """Write ``clip`` as 16-bit mono PCM, saturating out-of-range samples."""
    if len(clip) == 0:
        raise ValueError("cannot write an empty clip")
    scaled = np.round(np.clip(clip.samples, -1.0, 1.0) * 32768.0)
    pcm = np.clip(scaled, -32768, 32767).astype("<i2")
    wavfile.write(str(path), clip.sample_rate_hz, pcm)


def _resample_ratio(samples: np.ndarray, ratio: Fraction, out_len: int) -> np.ndarray:
    out = resample_poly(samples, ratio.numerator, ratio.denominator)
    if out.shape[0] >= out_len:
        return out[:out_len]
    return np.pad(out, (0, out_len - out.shape[0]))


def resample(clip: AudioClip, target_rate_hz: int) -> AudioClip:
    """Band-limited polyphase resampling to ``target_rate_hz``."""
    target_rate_hz = int(target_rate_hz)
    if target_rate_hz <= 0:
        raise ValueError("target_rate_hz must be positive")
    if target_rate_hz == clip.sample_rate_hz:
        return clip
    ratio = Fraction(target_rate_hz, clip.sample_rate_hz)
    out_len = int(round(len(clip) * target_rate_hz / clip.sample_rate_hz))
    return AudioClip(_resample_ratio(clip.samples, ratio, out_len), target_rate_hz)


def rescale_time(clip: AudioClip, factor: float) -> AudioClip:
    """Play ``clip`` ``factor`` times faster at the same sample rate.

    Equivalent to relabelling the rate as ``rate * factor`` and resampling back.
    """
    ratio = Fraction(1.0 / factor).limit_denominator(1000)
    out_len = int(round(len(clip) / factor))
    return AudioClip(_resample_ratio(clip.samples, ratio, out_len), clip.sample_rate_hz)
