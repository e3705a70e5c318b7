import numpy as np
import pytest

from v2s.audio import AudioClip, FrameGrid
from v2s.params import Aperiodicity, F0Contour, SpectralEnvelope, VocoderParams

FS = 16000


def sine(freq, duration=1.0, amplitude=0.5, fs=FS, phase=0.0):
    t = np.arange(int(round(duration * fs))) / fs
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t + phase), fs)


def tone_from_track(f0_track, amplitude=0.5, fs=FS):
    """Sine following a per-sample frequency track."""
    phase = 2 * np.pi * np.cumsum(f0_track) / fs
    return AudioClip(amplitude * np.sin(phase), fs)


def make_params(f0, fft_size=1024, aperiodicity=0.001, envelope=1e-3, period_ms=5.0, fs=FS):
    f0 = np.asarray(f0, dtype=float)
    grid = FrameGrid(period_ms, len(f0), fs)
    n_bins = fft_size // 2 + 1
    env = np.full((len(f0), n_bins), envelope, dtype=float)
    ap = np.full((len(f0), n_bins), aperiodicity, dtype=float)
    ap[f0 <= 0] = 1.0
    return VocoderParams(F0Contour(grid, f0), SpectralEnvelope(grid, fft_size, env),
                         Aperiodicity(grid, fft_size, ap))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, shown at the end of every run
ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] AC{number} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
