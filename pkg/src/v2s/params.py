"""Vocoder parameter types and their binary container."""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import FrameGrid
from .exceptions import ChecksumError, ContainerError, VersionMismatchError

ENVELOPE_FLOOR = 1e-12
APERIODICITY_FLOOR = 0.001


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class AnalysisConfig:
    """Analysis knobs. Defaults target adult speech at 16 kHz.

    ``voicing_reliability_threshold`` is relative: a frame is voiced when the
    spread of its best candidate's period estimates has standard deviation at
    most this fraction of the candidate F0.
    """

    f0_floor_hz: float = 60.0
    f0_ceil_hz: float = 500.0
    frame_period_ms: float = 5.0
    fft_size: int = 1024
    channel_count: int = 12
    voicing_reliability_threshold: float = 0.1
    silence_floor_db: float = -60.0

    def __post_init__(self):
        if not 0 < self.f0_floor_hz < self.f0_ceil_hz:
            raise ValueError("need 0 < f0_floor_hz < f0_ceil_hz")
        if self.frame_period_ms <= 0:
            raise ValueError("frame_period_ms must be positive")
        if not _is_power_of_two(int(self.fft_size)):
            raise ValueError("fft_size must be a power of two")
        if self.channel_count < 1:
            raise ValueError("channel_count must be positive")
        if self.voicing_reliability_threshold <= 0:
            raise ValueError("voicing_reliability_threshold must be positive")

    @classmethod
    def for_donors(cls, **overrides) -> "AnalysisConfig":
        """Config with the wider pitch range sung material needs."""
        values = dict(f0_floor_hz=100.0, f0_ceil_hz=1200.0)
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True, eq=False)
class F0Contour:
    grid: FrameGrid
    f0_hz: np.ndarray

    def __post_init__(self):
        f0 = np.asarray(self.f0_hz, dtype=np.float64)
        if f0.ndim != 1 or f0.shape[0] != self.grid.frame_count:
            raise ValueError("f0 length must equal grid.frame_count")
        if np.any(f0 < 0) or not np.all(np.isfinite(f0)):
            raise ValueError("f0 values must be finite and non-negative")
        object.__setattr__(self, "f0_hz", f0)

    @property
    def voiced(self) -> np.ndarray:
        return self.f0_hz > 0

    def __len__(self):
        return self.f0_hz.shape[0]

    def __eq__(self, other):
        if not isinstance(other, F0Contour):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.f0_hz, other.f0_hz)


@dataclass(frozen=True, eq=False)
class _SpectralFrames:
    grid: FrameGrid
    fft_size: int
    bins: np.ndarray

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float64)
        if not _is_power_of_two(int(self.fft_size)):
            raise ValueError("fft_size must be a power of two")
        expected = (self.grid.frame_count, self.fft_size // 2 + 1)
        if bins.shape != expected:
            raise ValueError(f"bins shape {bins.shape} != {expected}")
        object.__setattr__(self, "bins", bins)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (self.grid == other.grid and self.fft_size == other.fft_size
                and np.array_equal(self.bins, other.bins))


class SpectralEnvelope(_SpectralFrames):
    """Per-frame smoothed power spectrum, strictly positive."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.bins <= 0):
            raise ValueError("envelope values must be positive")


class Aperiodicity(_SpectralFrames):
    """Per-frame aperiodic-to-total power ratio, 1 meaning pure noise."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.bins < 0) or np.any(self.bins > 1):
            raise ValueError("aperiodicity values must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class VocoderParams:
    f0: F0Contour
    envelope: SpectralEnvelope
    aperiodicity: Aperiodicity

    def __post_init__(self):
        grids = {self.f0.grid, self.envelope.grid, self.aperiodicity.grid}
        if len(grids) != 1:
            raise ValueError("f0, envelope and aperiodicity must share one FrameGrid")
        if self.envelope.fft_size != self.aperiodicity.fft_size:
            raise ValueError("envelope and aperiodicity fft sizes differ")

    @property
    def grid(self) -> FrameGrid:
        return self.f0.grid

    @property
    def fft_size(self) -> int:
        return self.envelope.fft_size

    def __eq__(self, other):
        if not isinstance(other, VocoderParams):
            return NotImplemented
        return (self.f0 == other.f0 and self.envelope == other.envelope
                and self.aperiodicity == other.aperiodicity)


# container layout: magic | version | crc-protected payload | crc32(payload)
PARAMS_MAGIC = b"V2SP"
PARAMS_VERSION = 1
_PREFIX = struct.Struct("<4sI")
_GRID = struct.Struct("<IdII")  # frame_count, frame_period_ms, sample_rate, fft_size
_CRC = struct.Struct("<I")


def split_container(blob: bytes, magic: bytes, version: int) -> bytes:
    """Check magic, version and CRC of a container; return its payload."""
    if len(blob) < _PREFIX.size + _CRC.size:
        raise ContainerError("container truncated")
    got_magic, got_version = _PREFIX.unpack_from(blob)
    if got_magic != magic:
        raise ContainerError(f"bad magic {got_magic!r}, expected {magic!r}")
    if got_version != version:
        raise VersionMismatchError(
            f"format version {got_version} not supported (expected {version})")
    payload = blob[_PREFIX.size:-_CRC.size]
    (stored,) = _CRC.unpack_from(blob, len(blob) - _CRC.size)
    if zlib.crc32(payload) != stored:
        raise ChecksumError("checksum mismatch: container is corrupted")
    return payload


def join_container(payload: bytes, magic: bytes, version: int) -> bytes:
    return _PREFIX.pack(magic, version) + payload + _CRC.pack(zlib.crc32(payload))


def dumps_params(params: VocoderParams) -> bytes:
    grid = params.grid
    n_bins = params.fft_size // 2 + 1
    header = _GRID.pack(grid.frame_count, grid.frame_period_ms, grid.sample_rate_hz,
                        params.fft_size)
    body = b"".join([
        params.f0.f0_hz.astype("<f8").tobytes(),
        params.envelope.bins.astype("<f8").reshape(-1, n_bins).tobytes(),
        params.aperiodicity.bins.astype("<f8").reshape(-1, n_bins).tobytes(),
    ])
    return join_container(header + body, PARAMS_MAGIC, PARAMS_VERSION)


def loads_params(blob: bytes) -> VocoderParams:
    payload = split_container(blob, PARAMS_MAGIC, PARAMS_VERSION)
    if len(payload) < _GRID.size:
        raise ContainerError("params header truncated")
    count, period, rate, fft_size = _GRID.unpack_from(payload)
    if not _is_power_of_two(fft_size):
        raise ContainerError(f"invalid fft size {fft_size}")
    n_bins = fft_size // 2 + 1
    expected = _GRID.size + 8 * count * (1 + 2 * n_bins)
    if len(payload) != expected:
        raise ContainerError(f"payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f8", offset=_GRID.size).astype(np.float64)
    f0 = data[:count]
    env = data[count:count + count * n_bins].reshape(count, n_bins)
    ap = data[count + count * n_bins:].reshape(count, n_bins)
    try:
        grid = FrameGrid(period, count, rate)
        return VocoderParams(F0Contour(grid, f0), SpectralEnvelope(grid, fft_size, env),
                             Aperiodicity(grid, fft_size, ap))
    except ValueError as exc:
        raise ContainerError(f"invalid params container: {exc}") from exc


def dump_params(params: VocoderParams, path) -> None:
    Path(path).write_bytes(dumps_params(params))


def load_params(path) -> VocoderParams:
    return loads_params(Path(path).read_bytes())
