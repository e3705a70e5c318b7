"""Singing-voice donor database: build, persist and query by mean F0."""
from __future__ import annotations

import bisect
import enum
import logging
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import estimate_f0
from .audio import CANONICAL_RATE, FrameGrid, load_wav, resample
from .exceptions import ContainerError, DonorError
from .params import AnalysisConfig, F0Contour, join_container, split_container

log = logging.getLogger(__name__)

INDEX_MAGIC = b"V2SI"
INDEX_VERSION = 1
MEAN_RTOL = 1e-6


class Gender(str, enum.Enum):
    MALE = "male"
    FEMALE = "female"

    @classmethod
    def parse(cls, value) -> "Gender":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"gender must be 'male' or 'female', got {value!r}") from None


class Selection(str, enum.Enum):
    F0_MAP = "f0_map"
    RANDOM = "random"

    @classmethod
    def parse(cls, value) -> "Selection":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"selection must be 'f0_map' or 'random', got {value!r}") from None


def mean_voiced_f0(contour) -> float:
    """Arithmetic mean of the voiced (positive) F0 values."""
    f0 = contour.f0_hz if isinstance(contour, F0Contour) else np.asarray(contour, float)
    voiced = f0[f0 > 0]
    if voiced.size == 0:
        raise DonorError("no voiced frames")
    return float(voiced.mean())


@dataclass(frozen=True, eq=False)
class DonorRecord:
    donor_id: str
    gender: Gender
    mean_voiced_f0_hz: float
    contour: F0Contour
    source_path: str

    def __post_init__(self):
        if not self.donor_id:
            raise DonorError("donor_id must be non-empty")
        object.__setattr__(self, "gender", Gender.parse(self.gender))
        actual = mean_voiced_f0(self.contour)
        if not np.isclose(self.mean_voiced_f0_hz, actual, rtol=MEAN_RTOL, atol=0.0):
            raise DonorError(f"donor {self.donor_id}: stored mean {self.mean_voiced_f0_hz} "
                             f"differs from contour mean {actual}")

    @classmethod
    def from_contour(cls, donor_id, gender, contour, source_path="") -> "DonorRecord":
        return cls(donor_id, Gender.parse(gender), mean_voiced_f0(contour), contour,
                   str(source_path))

    def __eq__(self, other):
        if not isinstance(other, DonorRecord):
            return NotImplemented
        return (self.donor_id == other.donor_id and self.gender == other.gender
                and self.mean_voiced_f0_hz == other.mean_voiced_f0_hz
                and self.contour == other.contour and self.source_path == other.source_path)


class DonorIndex:
    """Donors partitioned by gender, each partition sorted by mean voiced F0."""

    format_version = INDEX_VERSION

    def __init__(self, records=()):
        records = list(records)
        ids = [r.donor_id for r in records]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise DonorError(f"duplicate donor_id: {', '.join(dupes)}")
        self._partitions = {
            g: sorted((r for r in records if r.gender is g),
                      key=lambda r: (r.mean_voiced_f0_hz, r.donor_id))
            for g in Gender
        }
        self._by_id = {r.donor_id: r for r in records}
        self.rejected: list[tuple[str, str]] = []

    def partition(self, gender) -> list[DonorRecord]:
        return list(self._partitions[Gender.parse(gender)])

    def __getitem__(self, donor_id: str) -> DonorRecord:
        return self._by_id[donor_id]

    def __len__(self):
        return len(self._by_id)

    def __iter__(self):
        for g in Gender:
            yield from self._partitions[g]

    def __eq__(self, other):
        if not isinstance(other, DonorIndex):
            return NotImplemented
        return all(self._partitions[g] == other._partitions[g] for g in Gender)

    def __repr__(self):
        sizes = ", ".join(f"{g.value}={len(p)}" for g, p in self._partitions.items())
        return f"DonorIndex({sizes})"


def select_donor(index: DonorIndex, gender, target_mean_f0_hz: float,
                 policy="f0_map", seed: int = 0) -> DonorRecord:
    """Pick a donor of ``gender``: closest mean F0 (ties to the smallest
    donor_id) under ``f0_map``, or a seeded uniform draw under ``random``."""
    gender = Gender.parse(gender)
    policy = Selection.parse(policy)
    part = index._partitions[gender]
    if not part:
        raise DonorError(f"no {gender.value} donors in index")
    if policy is Selection.RANDOM:
        rng = np.random.default_rng(seed)
        return part[int(rng.integers(len(part)))]
    means = [r.mean_voiced_f0_hz for r in part]
    i = bisect.bisect_left(means, target_mean_f0_hz)
    neighbours = {means[j] for j in (i - 1, i) if 0 <= j < len(means)}
    best = min(abs(m - target_mean_f0_hz) for m in neighbours)
    nearest = {m for m in neighbours if abs(m - target_mean_f0_hz) == best}
    # equal means are contiguous in the sorted partition
    lo = bisect.bisect_left(means, min(nearest))
    hi = bisect.bisect_right(means, max(nearest))
    return min((r for r in part[lo:hi] if r.mean_voiced_f0_hz in nearest),
               key=lambda r: r.donor_id)


def read_donor_manifest(path) -> list[tuple[str, Gender, Path]]:
    """Rows of ``donor_id<TAB>gender<TAB>audio_path``; relative paths resolve
    against the manifest's directory. Blank lines and ``#`` comments are skipped."""
    path = Path(path)
    rows = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DonorError(f"cannot read donor manifest {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) != 3:
            raise DonorError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        donor_id, gender, audio = (f.strip() for f in fields)
        try:
            gender = Gender.parse(gender)
        except ValueError as exc:
            raise DonorError(f"{path}:{lineno}: {exc}") from None
        audio_path = Path(audio)
        if not audio_path.is_absolute():
            audio_path = path.parent / audio_path
        rows.append((donor_id, gender, audio_path))
    ids = [r[0] for r in rows]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise DonorError(f"duplicate donor_id in manifest: {', '.join(dupes)}")
    return rows


def _analyze_donor(audio_path: Path, config: AnalysisConfig) -> F0Contour:
    clip = load_wav(audio_path)
    if clip.sample_rate_hz != CANONICAL_RATE:
        clip = resample(clip, CANONICAL_RATE)
    return estimate_f0(clip, config)


def build_index(donor_manifest, config: AnalysisConfig | None = None,
                workers: int = 1) -> DonorIndex:
    """Analyze every manifest row into a donor index.

    Rows without any voiced frame are left out and listed in ``index.rejected``.
    Unreadable audio is fatal.
    """
    config = config or AnalysisConfig.for_donors()
    rows = read_donor_manifest(donor_manifest)
    paths = [r[2] for r in rows]
    try:
        if workers > 1 and len(rows) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                contours = list(pool.map(_analyze_donor, paths, [config] * len(paths)))
        else:
            contours = [_analyze_donor(p, config) for p in paths]
    except (OSError, ValueError) as exc:
        raise DonorError(f"cannot analyze donor audio: {exc}") from exc
    records, rejected = [], []
    for (donor_id, gender, audio_path), contour in zip(rows, contours):
        if not contour.voiced.any():
            rejected.append((donor_id, "no voiced frames"))
            log.warning("donor %s rejected: no voiced frames in %s", donor_id, audio_path)
            continue
        records.append(DonorRecord.from_contour(donor_id, gender, contour, audio_path))
    index = DonorIndex(records)
    index.rejected = rejected
    return index


_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_RECORD = struct.Struct("<BdIdI")  # gender, mean, frame_count, frame_period_ms, sample_rate
_GENDER_CODES = {Gender.MALE: 0, Gender.FEMALE: 1}
_GENDER_BY_CODE = {v: k for k, v in _GENDER_CODES.items()}


def dumps_index(index: DonorIndex) -> bytes:
    parts = [_U32.pack(len(index))]
    for r in index:
        donor_id = r.donor_id.encode("utf-8")
        source = r.source_path.encode("utf-8")
        grid = r.contour.grid
        parts += [
            _U16.pack(len(donor_id)), donor_id,
            _U32.pack(len(source)), source,
            _RECORD.pack(_GENDER_CODES[r.gender], r.mean_voiced_f0_hz, grid.frame_count,
                         grid.frame_period_ms, grid.sample_rate_hz),
            r.contour.f0_hz.astype("<f8").tobytes(),
        ]
    return join_container(b"".join(parts), INDEX_MAGIC, INDEX_VERSION)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ContainerError("index payload truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))


def loads_index(blob: bytes) -> DonorIndex:
    reader = _Reader(split_container(blob, INDEX_MAGIC, INDEX_VERSION))
    (count,) = reader.unpack(_U32)
    records, stored_order = [], []
    try:
        for _ in range(count):
            (id_len,) = reader.unpack(_U16)
            donor_id = reader.take(id_len).decode("utf-8")
            (src_len,) = reader.unpack(_U32)
            source = reader.take(src_len).decode("utf-8")
            code, mean, n_frames, period, rate = reader.unpack(_RECORD)
            if code not in _GENDER_BY_CODE:
                raise ContainerError(f"unknown gender code {code}")
            f0 = np.frombuffer(reader.take(8 * n_frames), dtype="<f8").astype(np.float64)
            contour = F0Contour(FrameGrid(period, n_frames, rate), f0)
            records.append(DonorRecord(donor_id, _GENDER_BY_CODE[code], mean, contour, source))
            stored_order.append(donor_id)
        if reader.pos != len(reader.data):
            raise ContainerError("trailing bytes after last donor record")
        index = DonorIndex(records)
    except (UnicodeDecodeError, ValueError) as exc:
        if isinstance(exc, ContainerError):
            raise
        raise ContainerError(f"invalid donor index: {exc}") from exc
    if [r.donor_id for r in index] != stored_order:
        raise ContainerError("donor partitions are not sorted by mean F0")
    return index


def save_index(index: DonorIndex, path) -> None:
    Path(path).write_bytes(dumps_index(index))


def load_index(path) -> DonorIndex:
    return loads_index(Path(path).read_bytes())
