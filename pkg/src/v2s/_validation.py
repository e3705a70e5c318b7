"""Input coercion shared by the estimator wrappers."""
from __future__ import annotations

import numbers

import numpy as np

from .audio import CANONICAL_RATE, AudioClip
from .donors import DonorIndex, DonorRecord, Gender


def check_clip(x, sample_rate_hz: int = CANONICAL_RATE) -> AudioClip:
    """Accept an AudioClip or a 1-D array of samples at ``sample_rate_hz``."""
    if isinstance(x, AudioClip):
        return x
    samples = np.asarray(x, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError(f"expected a 1-D sample array, got shape {samples.shape}")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples contain NaN or infinity")
    return AudioClip(samples, sample_rate_hz)


def check_clips(X, sample_rate_hz: int = CANONICAL_RATE) -> list[AudioClip]:
    if isinstance(X, (AudioClip, np.ndarray)) and getattr(X, "ndim", 1) == 1:
        raise ValueError("expected a sequence of clips; wrap a single clip in a list")
    return [check_clip(x, sample_rate_hz) for x in X]


def check_index(X) -> DonorIndex:
    """Accept a DonorIndex or an iterable of DonorRecord."""
    if isinstance(X, DonorIndex):
        return X
    records = list(X)
    bad = [r for r in records if not isinstance(r, DonorRecord)]
    if bad:
        raise TypeError(f"expected DonorRecord items, got {type(bad[0]).__name__}")
    return DonorIndex(records)


def check_queries(X) -> list[tuple[Gender, float]]:
    """Rows of ``(gender, target_mean_f0_hz)``."""
    rows = []
    for row in X:
        if len(row) != 2:
            raise ValueError("each query row must be (gender, target_mean_f0_hz)")
        gender, target = row
        if not isinstance(target, numbers.Real) or not np.isfinite(target) or target <= 0:
            raise ValueError(f"target mean F0 must be a positive number, got {target!r}")
        rows.append((Gender.parse(gender), float(target)))
    return rows


def check_genders(genders, n: int) -> list[Gender]:
    if isinstance(genders, (str, Gender)):
        return [Gender.parse(genders)] * n
    genders = [Gender.parse(g) for g in genders]
    if len(genders) != n:
        raise ValueError(f"got {len(genders)} genders for {n} clips")
    return genders
