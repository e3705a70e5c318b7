"""Voice-to-singing conversion and corpus-scale augmentation."""
from __future__ import annotations

import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import analyze
from .audio import CANONICAL_RATE, AudioClip, load_wav, rescale_time, resample, save_wav
from .donors import DonorIndex, DonorRecord, Gender, Selection, mean_voiced_f0, select_donor
from .exceptions import DonorError, V2SError
from .params import AnalysisConfig, F0Contour, VocoderParams
from .synthesis import synthesize

log = logging.getLogger(__name__)

SPEED_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class TransplantPolicy:
    """How a donor contour of the wrong length is fitted to the speech.

    ``truncate_or_tile``: cut a longer donor, repeat a shorter one end to end.
    """

    length_mode: str = "truncate_or_tile"

    def __post_init__(self):
        if self.length_mode != "truncate_or_tile":
            raise ValueError(f"unknown length_mode {self.length_mode!r}")

    def fit(self, donor_f0: np.ndarray, n_frames: int) -> np.ndarray:
        return np.resize(donor_f0, n_frames)


def transplant_f0(speech: VocoderParams, donor, policy: TransplantPolicy | None = None
                  ) -> VocoderParams:
    """Speech envelope and aperiodicity driven by the donor's F0 contour."""
    policy = policy or TransplantPolicy()
    contour = donor.contour if isinstance(donor, DonorRecord) else donor
    if len(contour) == 0 or not contour.voiced.any():
        raise DonorError("empty donor contour: no voiced frames")
    if contour.grid.frame_period_ms != speech.grid.frame_period_ms:
        raise DonorError(f"donor frame period {contour.grid.frame_period_ms} ms differs from "
                         f"speech frame period {speech.grid.frame_period_ms} ms")
    f0 = F0Contour(speech.grid, policy.fit(contour.f0_hz, speech.grid.frame_count))
    return VocoderParams(f0, speech.envelope, speech.aperiodicity)


@dataclass(frozen=True)
class Conversion:
    clip: AudioClip
    donor: DonorRecord
    speech_mean_f0: float  # nan when the speech has no voiced frame
    params: VocoderParams


def convert_detailed(speech: AudioClip, gender, index: DonorIndex,
                     config: AnalysisConfig | None = None,
                     policy: TransplantPolicy | None = None,
                     selection="f0_map", seed: int = 0) -> Conversion:
    config = config or AnalysisConfig()
    selection = Selection.parse(selection)
    params = analyze(speech, config)
    try:
        speech_mean = mean_voiced_f0(params.f0)
    except DonorError:
        if selection is Selection.F0_MAP:
            raise DonorError("speech has no voiced frames; f0_map selection needs a mean F0")
        speech_mean = math.nan
    donor = select_donor(index, gender, speech_mean, selection, seed)
    converted = transplant_f0(params, donor, policy)
    return Conversion(synthesize(converted, seed=seed), donor, speech_mean, converted)


def convert(speech: AudioClip, gender, index: DonorIndex,
            config: AnalysisConfig | None = None, policy: TransplantPolicy | None = None,
            selection="f0_map", seed: int = 0) -> tuple[AudioClip, str]:
    """Convert ``speech`` to singing; returns the clip and the chosen donor_id."""
    result = convert_detailed(speech, gender, index, config, policy, selection, seed)
    return result.clip, result.donor.donor_id


def speed_perturb(clip: AudioClip, factor: float) -> AudioClip:
    """Speed up by ``factor``: duration divides by it, pitch multiplies by it."""
    if not SPEED_RANGE[0] <= factor <= SPEED_RANGE[1]:
        raise ValueError(f"speed factor {factor} outside {SPEED_RANGE}")
    if factor == 1.0:
        return clip
    return rescale_time(clip, factor)


@dataclass(frozen=True)
class ManifestRow:
    utterance_id: str
    speech_path: Path
    gender: Gender
    transcript: str
    output_path: Path


class ManifestError(V2SError, ValueError):
    pass


def read_augmentation_manifest(path) -> list[ManifestRow]:
    """Parse ``utterance_id, speech_path, gender, transcript, output_path`` rows
    (tab-separated). Relative paths resolve against the manifest's directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    rows, seen = [], set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise ManifestError(f"{path}:{lineno}: expected 5 tab-separated fields, "
                                f"got {len(fields)}")
        utt, speech, gender, transcript, output = fields
        utt, speech, output = utt.strip(), speech.strip(), output.strip()
        if not utt or not speech or not output:
            raise ManifestError(f"{path}:{lineno}: empty utterance_id or path")
        if utt in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate utterance_id {utt!r}")
        seen.add(utt)
        try:
            gender = Gender.parse(gender)
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from None
        resolve = lambda p: Path(p) if Path(p).is_absolute() else path.parent / p
        rows.append(ManifestRow(utt, resolve(speech), gender, transcript, resolve(output)))
    return rows


@dataclass(frozen=True)
class ReportRow:
    utterance_id: str
    factor: float
    donor_id: str
    speech_mean_f0: float
    donor_mean_f0: float
    status: str
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


REPORT_COLUMNS = ("utterance_id", "factor", "donor_id", "speech_mean_f0", "donor_mean_f0",
                  "status", "message")


def _fmt_f0(value: float) -> str:
    return "" if value is None or math.isnan(value) else f"{value:.6f}"


class ConversionReport:
    def __init__(self, rows):
        self.rows = sorted(rows, key=lambda r: (r.utterance_id, r.factor))

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def n_errors(self) -> int:
        return sum(not r.ok for r in self.rows)

    def to_tsv(self) -> str:
        lines = ["\t".join(REPORT_COLUMNS)]
        for r in self.rows:
            message = r.message.replace("\t", " ").replace("\n", " ")
            lines.append("\t".join([r.utterance_id, f"{r.factor:.2f}", r.donor_id,
                                    _fmt_f0(r.speech_mean_f0), _fmt_f0(r.donor_mean_f0),
                                    r.status, message]))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")

    def __eq__(self, other):
        if not isinstance(other, ConversionReport):
            return NotImplemented
        return self.to_tsv() == other.to_tsv()

    def __len__(self):
        return len(self.rows)


def output_path_for(base: Path, factor: float, suffixed: bool) -> Path:
    if not suffixed:
        return base
    return base.with_name(f"{base.stem}_sp{factor:.2f}{base.suffix}")


def row_seed(seed: int, utterance_id: str) -> int:
    """Per-row seed, independent of row order and scheduling."""
    return (seed * 1_000_003 + zlib.crc32(utterance_id.encode("utf-8"))) % (2 ** 32)


@dataclass(frozen=True)
class _BatchJob:
    index: DonorIndex
    config: AnalysisConfig
    policy: TransplantPolicy
    selection: Selection
    factors: tuple
    seed: int


def _process_row(job: _BatchJob, row: ManifestRow) -> list[ReportRow]:
    suffixed = set(job.factors) != {1.0}
    try:
        speech = load_wav(row.speech_path)
        if speech.sample_rate_hz != CANONICAL_RATE:
            speech = resample(speech, CANONICAL_RATE)
        result = convert_detailed(speech, row.gender, job.index, job.config, job.policy,
                                  job.selection, row_seed(job.seed, row.utterance_id))
        out = []
        for factor in job.factors:
            target = output_path_for(row.output_path, factor, suffixed)
            target.parent.mkdir(parents=True, exist_ok=True)
            save_wav(speed_perturb(result.clip, factor), target)
            out.append(ReportRow(row.utterance_id, factor, result.donor.donor_id,
                                 result.speech_mean_f0, result.donor.mean_voiced_f0_hz, "ok"))
        return out
    except (V2SError, OSError, ValueError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        log.warning("utterance %s failed: %s", row.utterance_id, message)
        return [ReportRow(row.utterance_id, f, "", math.nan, math.nan, "error", message)
                for f in job.factors]


_WORKER_JOB: _BatchJob | None = None


def _init_worker(job: _BatchJob) -> None:
    global _WORKER_JOB
    _WORKER_JOB = job


def _process_row_in_worker(row: ManifestRow) -> list[ReportRow]:
    return _process_row(_WORKER_JOB, row)


def batch_augment(manifest, index: DonorIndex, config: AnalysisConfig | None = None,
                  policy: TransplantPolicy | None = None, selection="f0_map",
                  speed_factors=(1.0,), seed: int = 0, workers: int = 1) -> ConversionReport:
    """Convert every manifest row, writing one WAV per speed factor.

    ``manifest`` is a path or a list of :class:`ManifestRow`. Per-row failures
    become error rows; only an unreadable manifest raises.
    """
    rows = manifest if isinstance(manifest, list) else read_augmentation_manifest(manifest)
    factors = tuple(float(f) for f in speed_factors)
    if not factors:
        raise ValueError("need at least one speed factor")
    for f in factors:
        if not SPEED_RANGE[0] <= f <= SPEED_RANGE[1]:
            raise ValueError(f"speed factor {f} outside {SPEED_RANGE}")
    job = _BatchJob(index, config or AnalysisConfig(), policy or TransplantPolicy(),
                    Selection.parse(selection), factors, seed)
    if workers > 1 and len(rows) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(job,)) as pool:
            results = list(pool.map(_process_row_in_worker, rows))
    else:
        results = [_process_row(job, row) for row in rows]
    return ConversionReport(r for rs in results for r in rs)
