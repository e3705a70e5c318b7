"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every oracle here is independent of the code under test: generator
frequencies for F0, the length formula, index arithmetic for the transplant,
a linear scan for donor selection, and random byte substitutions for
corruption.
"""
import time
import zlib

import numpy as np

from v2s.analysis import analyze, estimate_f0
from v2s.audio import AudioClip, FrameGrid
from v2s.cli import main as cli_main
from v2s.donors import (DonorIndex, DonorRecord, Gender, dumps_index, load_index,
                        loads_index, select_donor)
from v2s.exceptions import ChecksumError
from v2s.minicorpus import VOWELS, harmonic_signal, speech_like, sung_like
from v2s.params import (AnalysisConfig, Aperiodicity, F0Contour, SpectralEnvelope,
                        VocoderParams, dumps_params, loads_params)
from v2s.pipeline import convert_detailed, speed_perturb, transplant_f0
from v2s.synthesis import synthesize

from conftest import FS, make_params, record_criterion


def _voiced_median(clip, config=None):
    f0 = estimate_f0(clip, config).f0_hz
    return np.median(f0[f0 > 0]) if (f0 > 0).any() else 0.0


# --- AC1 -------------------------------------------------------------------

def _tone_set(rng):
    """200 (clip, per-sample truth) pairs: constant, vibrato and AM sines."""
    t = np.arange(FS) / FS
    tones = []
    for i in range(200):
        base = rng.uniform(80, 400)
        kind = i % 3
        if kind == 0:
            track = np.full(FS, base)
        elif kind == 1:
            track = base * (1 + 0.1 * np.sin(2 * np.pi * rng.uniform(4, 7) * t
                                             + rng.uniform(0, 2 * np.pi)))
        else:
            track = np.full(FS, base)
        phase = 2 * np.pi * np.cumsum(track) / FS + rng.uniform(0, 2 * np.pi)
        x = rng.uniform(0.05, 0.9) * np.sin(phase)
        if kind == 2:
            depth, rate = rng.uniform(0.2, 0.6), rng.uniform(2, 8)
            x *= 1 - depth + depth * np.sin(2 * np.pi * rate * t)
        tones.append((AudioClip(x, FS), track))
    return tones


def test_ac1_f0_estimator_accuracy():
    rng = np.random.default_rng(101)
    tones = _tone_set(rng)
    start = time.perf_counter()
    gross = voiced = frames = 0
    for clip, track in tones:
        contour = estimate_f0(clip)
        truth = track[np.minimum((contour.grid.times * FS).astype(int), FS - 1)]
        v = contour.voiced
        frames += len(v)
        voiced += v.sum()
        gross += np.sum(np.abs(contour.f0_hz[v] - truth[v]) > 0.2 * truth[v])
    spurious = total = 0
    for k in range(20):
        x = np.zeros(FS) if k % 2 == 0 else rng.uniform(0.01, 0.5) * rng.standard_normal(FS)
        contour = estimate_f0(AudioClip(np.clip(x, -1, 1), FS))
        spurious += contour.voiced.sum()
        total += len(contour)
    elapsed = time.perf_counter() - start
    gpe, spurious_rate = gross / voiced, spurious / total
    ok = gpe < 0.05 and spurious_rate < 0.10 and elapsed < 30
    assert record_criterion(
        1, "F0 accuracy", ok,
        f"GPE {gpe:.4f} (<0.05) over {voiced}/{frames} voiced frames of 200 tones; "
        f"spurious voicing {spurious_rate:.4f} (<0.10) on 10 silence + 10 noise; "
        f"runtime {elapsed:.1f}s (<30)")


# --- AC2 -------------------------------------------------------------------

def _piecewise_f0(rng, n_frames):
    cuts = np.sort(rng.choice(np.arange(20, n_frames - 20), rng.integers(1, 4), replace=False))
    pieces = np.split(np.arange(n_frames), cuts)
    f0 = np.empty(n_frames)
    for piece in pieces:
        f0[piece] = rng.uniform(80, 400)
    return f0


def test_ac2_analysis_synthesis_round_trip():
    rng = np.random.default_rng(202)
    worst, length_ok = 0.0, True
    for _ in range(50):
        n_frames = int(rng.integers(80, 300))
        f0 = _piecewise_f0(rng, n_frames)
        params = make_params(f0, envelope=rng.uniform(1e-4, 1e-2))
        out = synthesize(params)
        length_ok &= len(out) == round((n_frames - 1) * 5.0 / 1000 * FS)
        est = estimate_f0(out).f0_hz
        m = min(len(est), n_frames)
        both = (est[:m] > 0) & (f0[:m] > 0)
        worst = max(worst, float(np.mean(np.abs(est[:m][both] - f0[:m][both]))))
    ok = worst <= 5.0 and length_ok
    assert record_criterion(
        2, "round trip", ok,
        f"worst-case mean |F0 error| {worst:.3f} Hz (<=5) over 50 contours; "
        f"length formula exact: {length_ok}")


# --- AC3 -------------------------------------------------------------------

def test_ac3_transplant_bit_exact():
    rng = np.random.default_rng(303)
    kinds = {"shorter": 0, "equal": 0, "longer": 0}
    failures = 0
    for case in range(100):
        n_speech = int(rng.integers(2, 600))
        kind = ("shorter", "equal", "longer")[case % 3]
        n_donor = {"shorter": int(rng.integers(1, n_speech)) if n_speech > 1 else 1,
                   "equal": n_speech,
                   "longer": int(rng.integers(n_speech + 1, 3 * n_speech + 2))}[kind]
        kinds[kind if n_donor != n_speech or kind == "equal" else "equal"] += 1
        donor_f0 = np.where(rng.random(n_donor) < 0.25, 0.0, rng.uniform(100, 1200, n_donor))
        donor_f0[rng.integers(n_donor)] = 440.0  # at least one voiced frame
        grid = FrameGrid(5.0, n_speech, FS)
        n_bins = 33
        speech = VocoderParams(
            F0Contour(grid, rng.uniform(60, 500, n_speech)),
            SpectralEnvelope(grid, 64, rng.uniform(1e-6, 1.0, (n_speech, n_bins))),
            Aperiodicity(grid, 64, rng.uniform(0.001, 1.0, (n_speech, n_bins))))
        env_before = speech.envelope.bins.tobytes()
        ap_before = speech.aperiodicity.bins.tobytes()
        out = transplant_f0(speech, F0Contour(FrameGrid(5.0, n_donor, FS), donor_f0))
        expected = np.array([donor_f0[i % n_donor] for i in range(n_speech)])
        failures += not (out.f0.f0_hz.tobytes() == expected.tobytes()
                         and out.envelope.bins.tobytes() == env_before
                         and out.aperiodicity.bins.tobytes() == ap_before
                         and out.grid == speech.grid)
    ok = failures == 0 and all(kinds.values())
    assert record_criterion(
        3, "transplant", ok,
        f"{100 - failures}/100 bit-exact (donor shorter {kinds['shorter']}, "
        f"equal {kinds['equal']}, longer {kinds['longer']})")


# --- AC4 -------------------------------------------------------------------

WIDE = AnalysisConfig(f0_floor_hz=60.0, f0_ceil_hz=1000.0)


def _smoothed_db(params):
    env = params.envelope.bins.mean(axis=0)
    kernel = np.ones(9) / 9
    return np.convolve(10 * np.log10(env), kernel, mode="valid")


def test_ac4_conversion_fidelity():
    rng = np.random.default_rng(404)
    f0_corrs, env_corrs = [], []
    for pair in range(20):
        male = pair % 2 == 0
        speech_f0 = rng.uniform(95, 150) if male else rng.uniform(180, 260)
        vowels = "".join(rng.permutation(list(VOWELS)))
        samples, _ = speech_like(1.5, speech_f0, vowels, seed=pair)
        speech = AudioClip(samples, FS)
        lo = rng.uniform(110, 200) if male else rng.uniform(200, 420)
        notes = tuple(lo * 2 ** (rng.integers(0, 8, 4) / 12))
        donor_audio, _ = sung_like(1.0 + rng.uniform(0, 1.0), notes, seed=1000 + pair)
        contour = estimate_f0(AudioClip(donor_audio, FS), AnalysisConfig.for_donors())
        gender = Gender.MALE if male else Gender.FEMALE
        index = DonorIndex([DonorRecord.from_contour(f"d{pair}", gender, contour)])
        result = convert_detailed(speech, gender, index, seed=pair)
        target = result.params.f0.f0_hz
        out = analyze(result.clip, WIDE)
        est = out.f0.f0_hz
        m = min(len(est), len(target))
        both = (est[:m] > 0) & (target[:m] > 0)
        f0_corrs.append(np.corrcoef(est[:m][both], target[:m][both])[0, 1])
        source = analyze(speech)
        env_corrs.append(np.corrcoef(_smoothed_db(out), _smoothed_db(source))[0, 1])
    ok = min(f0_corrs) > 0.9 and min(env_corrs) > 0.8
    assert record_criterion(
        4, "conversion fidelity", ok,
        f"F0 corr min {min(f0_corrs):.3f} / median {np.median(f0_corrs):.3f} (>0.9); "
        f"envelope corr min {min(env_corrs):.3f} / median {np.median(env_corrs):.3f} (>0.8) "
        f"over 20 pairs")


# --- AC5 -------------------------------------------------------------------

def _record(donor_id, gender, mean):
    return DonorRecord.from_contour(donor_id, gender,
                                    F0Contour(FrameGrid(5.0, 2, FS), [0.0, mean]))


def test_ac5_selection_oracle():
    rng = np.random.default_rng(505)
    mismatches = wrong_gender = 0
    for _ in range(1000):
        n = int(rng.integers(1, 25))
        # integer means on a coarse grid make exact ties common
        means = rng.integers(8, 60, n) * 10.0 + rng.choice([0.0, 0.5], n)
        genders = [(Gender.MALE, Gender.FEMALE)[k] for k in rng.integers(0, 2, n)]
        ids = [f"donor{int(v):03d}" for v in rng.permutation(1000)[:n]]
        records = [_record(i, g, m) for i, g, m in zip(ids, genders, means)]
        index = DonorIndex(records)
        gender = Gender.MALE if rng.random() < 0.5 else Gender.FEMALE
        if not any(r.gender is gender for r in records):
            gender = records[0].gender
        target = float(rng.choice([rng.uniform(50, 700), rng.integers(8, 60) * 10.0 + 5.0]))
        best, best_key = None, None
        for r in records:  # linear scan, independent of the sorted partitions
            if r.gender is not gender:
                continue
            key = (abs(r.mean_voiced_f0_hz - target), r.donor_id)
            if best_key is None or key < best_key:
                best, best_key = r, key
        pick = select_donor(index, gender, target, "f0_map")
        mismatches += pick.donor_id != best.donor_id
        wrong_gender += pick.gender is not gender
        wrong_gender += select_donor(index, gender, target, "random",
                                     int(rng.integers(1 << 30))).gender is not gender
    ok = mismatches == 0 and wrong_gender == 0
    assert record_criterion(
        5, "donor selection", ok,
        f"{1000 - mismatches}/1000 match brute-force argmin with id tie-break; "
        f"gender violations {wrong_gender}")


# --- AC6 -------------------------------------------------------------------

def test_ac6_speed_perturbation():
    rng = np.random.default_rng(606)
    identity = True
    worst_len, worst_pitch = 0.0, 0.0
    signals = []
    for f in (110.0, 200.0, 310.0):
        t = np.arange(FS) / FS
        signals.append((AudioClip(0.5 * np.sin(2 * np.pi * f * t), FS), f))
        x = harmonic_signal(np.full(FS, f), VOWELS["a"])
        signals.append((AudioClip(x, FS), f))
    for clip, f in signals:
        same = speed_perturb(clip, 1.0)
        identity &= same.samples.tobytes() == clip.samples.tobytes()
        for factor in (0.9, 1.1):
            out = speed_perturb(clip, factor)
            worst_len = max(worst_len, abs(len(out) - len(clip) / factor))
            worst_pitch = max(worst_pitch, abs(_voiced_median(out) / (f * factor) - 1))
    noise = AudioClip(rng.uniform(-1, 1, 12345), FS)
    identity &= speed_perturb(noise, 1.0).samples.tobytes() == noise.samples.tobytes()
    ok = identity and worst_len <= 1.0 and worst_pitch <= 0.03
    assert record_criterion(
        6, "speed perturbation", ok,
        f"factor 1.0 bit-identical: {identity}; worst duration error {worst_len:.2f} samples "
        f"(<=1); worst pitch ratio error {100 * worst_pitch:.3f}% (<=3%)")


# --- AC7 -------------------------------------------------------------------

def _run_mini_corpus(root, workers):
    start = time.perf_counter()
    assert cli_main(["mini-corpus", str(root)]) == 0
    assert cli_main(["index-donors", str(root / "donors.tsv"), str(root / "index.bin"),
                     "--workers", str(workers)]) == 0
    code = cli_main(["batch", str(root / "manifest.tsv"), "--index", str(root / "index.bin"),
                     "--report", str(root / "report.tsv"), "--workers", str(workers),
                     "--seed", "17"])
    elapsed = time.perf_counter() - start
    files = {p.relative_to(root).as_posix(): p.read_bytes()
             for p in sorted((root / "out").glob("*.wav"))}
    files["report.tsv"] = (root / "report.tsv").read_bytes()
    # the index embeds each run's absolute donor paths; compare its content instead
    index = load_index(root / "index.bin")
    files["index"] = [(r.donor_id, r.mean_voiced_f0_hz, r.contour.f0_hz.tobytes())
                      for r in index]
    return code, elapsed, files


def test_ac7_batch_determinism(tmp_path, capsys):
    runs = [_run_mini_corpus(tmp_path / name, workers)
            for name, workers in (("serial_a", 1), ("serial_b", 1), ("parallel", 4))]
    capsys.readouterr()
    codes = [r[0] for r in runs]
    times = [r[1] for r in runs]
    outputs = [r[2] for r in runs]
    n_wavs = sum(k.endswith(".wav") for k in outputs[0])
    same = outputs[0] == outputs[1] == outputs[2]
    ok = codes == [0, 0, 0] and n_wavs == 3 and same and max(times) < 10
    assert record_criterion(
        7, "batch determinism", ok,
        f"exit codes {codes}; {n_wavs} outputs; serial x2 and 4-worker byte-identical: {same}; "
        f"wall times {', '.join(f'{t:.2f}s' for t in times)} (<10 s each)")


# --- AC8 -------------------------------------------------------------------

def _corrupt_all(blob, rng, loader, header, trailer=4):
    rejected = 0
    for _ in range(50):
        pos = int(rng.integers(header, len(blob) - trailer))
        bad = bytearray(blob)
        bad[pos] = (bad[pos] + int(rng.integers(1, 256))) % 256
        try:
            loader(bytes(bad))
        except ChecksumError:
            rejected += 1
    return rejected


def test_ac8_serialization():
    rng = np.random.default_rng(808)
    lossless = True
    for n in (2, 17, 150):
        f0 = np.where(rng.random(n) < 0.3, 0.0, rng.uniform(60, 500, n))
        grid = FrameGrid(5.0, n, FS)
        params = VocoderParams(
            F0Contour(grid, f0),
            SpectralEnvelope(grid, 512, rng.lognormal(-10, 4, (n, 257))),
            Aperiodicity(grid, 512, rng.uniform(0.001, 1.0, (n, 257))))
        back = loads_params(dumps_params(params))
        lossless &= back == params and dumps_params(back) == dumps_params(params)
    index = DonorIndex([
        DonorRecord.from_contour(f"singer_{i}", ("male", "female")[i % 2],
                                 F0Contour(FrameGrid(5.0, 60 + i, FS),
                                           np.where(rng.random(60 + i) < 0.2, 0.0,
                                                    rng.uniform(100, 1200, 60 + i))),
                                 f"/data/singer_{i}.wav")
        for i in range(5)])
    lossless &= loads_index(dumps_index(index)) == index
    params_blob = dumps_params(params)
    index_blob = dumps_index(index)
    # sanity: the trailer really is the payload CRC
    lossless &= int.from_bytes(index_blob[-4:], "little") == zlib.crc32(index_blob[8:-4])
    p_rej = _corrupt_all(params_blob, rng, loads_params, header=8)
    i_rej = _corrupt_all(index_blob, rng, loads_index, header=8)
    ok = lossless and p_rej == 50 and i_rej == 50
    assert record_criterion(
        8, "serialization", ok,
        f"round trips lossless: {lossless}; checksum rejections params {p_rej}/50, "
        f"index {i_rej}/50")
