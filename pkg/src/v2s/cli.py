"""``v2s`` command line: analysis, synthesis, donor indexing and conversion."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path


from . import __version__
from .analysis import analyze
from .audio import CANONICAL_RATE, load_wav, resample, save_wav
from .donors import Selection, build_index, load_index, save_index
from .exceptions import V2SError
from .minicorpus import write_mini_corpus
from .params import AnalysisConfig, dump_params, load_params
from .pipeline import TransplantPolicy, batch_augment, convert_detailed, speed_perturb
from .synthesis import synthesize

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("v2s")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2


@dataclass(frozen=True)
class CliConfig:
    seed: int = 0
    frame_period_ms: float = 5.0
    f0_floor: float | None = None
    f0_ceil: float | None = None
    fft_size: int = 1024
    selection: str = "f0_map"
    workers: int = os.cpu_count() or 1
    resample: bool = False

    def analysis_config(self, donors: bool = False) -> AnalysisConfig:
        base = AnalysisConfig.for_donors() if donors else AnalysisConfig()
        return replace(
            base,
            f0_floor_hz=base.f0_floor_hz if self.f0_floor is None else self.f0_floor,
            f0_ceil_hz=base.f0_ceil_hz if self.f0_ceil is None else self.f0_ceil,
            frame_period_ms=self.frame_period_ms,
            fft_size=self.fft_size,
        )


_CONFIG_KEYS = {f.name for f in fields(CliConfig)}


def load_config_file(path) -> dict:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys in {path}: {', '.join(unknown)}")
    return data


def resolve_config(args: argparse.Namespace) -> CliConfig:
    """Flags override the config file, which overrides built-in defaults."""
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if "selection" in values:
        values["selection"] = Selection.parse(values["selection"]).value
    config = CliConfig(**values)
    if config.workers < 1:
        raise ValueError("--workers must be at least 1")
    if config.frame_period_ms < 5.0:
        raise ValueError("--frame-period-ms below 5 ms is not supported")
    config.analysis_config()  # validates ranges and fft size
    return config


def _global_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    g = parent.add_argument_group("global options")
    g.add_argument("--config", type=Path, help="TOML file with defaults for these options")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--frame-period-ms", dest="frame_period_ms", type=float, default=None)
    g.add_argument("--f0-floor", dest="f0_floor", type=float, default=None)
    g.add_argument("--f0-ceil", dest="f0_ceil", type=float, default=None)
    g.add_argument("--fft-size", dest="fft_size", type=int, default=None)
    g.add_argument("--selection", choices=["f0-map", "random"], default=None)
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--resample", action="store_const", const=True, default=None,
                   help=f"resample input audio to {CANONICAL_RATE} Hz instead of failing")
    g.add_argument("-v", "--verbose", action="store_true")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parent = _global_flags()
    parser = argparse.ArgumentParser(prog="v2s", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[parent], help="decompose a WAV into vocoder params")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)

    p = sub.add_parser("synth", parents=[parent], help="render vocoder params to WAV")
    p.add_argument("params", type=Path)
    p.add_argument("output", type=Path)

    p = sub.add_parser("index-donors", parents=[parent], help="build a donor index")
    p.add_argument("manifest", type=Path, help="donor_id<TAB>gender<TAB>audio_path rows")
    p.add_argument("output", type=Path)

    p = sub.add_parser("convert", parents=[parent], help="convert one speech file to singing")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--gender", required=True, choices=["male", "female"])
    p.add_argument("--index", required=True, type=Path)

    p = sub.add_parser("batch", parents=[parent], help="convert a manifest of utterances")
    p.add_argument("manifest", type=Path)
    p.add_argument("--index", required=True, type=Path)
    p.add_argument("--report", type=Path, help="report path (default: standard output)")
    p.add_argument("--speed-factors", default="1.0",
                   help="comma-separated speed factors, e.g. 0.9,1.0,1.1")

    p = sub.add_parser("perturb", parents=[parent], help="speed-perturb a WAV")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--factor", type=float, required=True)

    p = sub.add_parser("mini-corpus", parents=[parent],
                       help="write the synthetic 3-utterance, 4-donor demo corpus")
    p.add_argument("directory", type=Path)
    return parser


def _load_input(path: Path, config: CliConfig):
    clip = load_wav(path)
    if clip.sample_rate_hz != CANONICAL_RATE:
        if not config.resample:
            raise V2SError(f"expected {CANONICAL_RATE} Hz audio, got {clip.sample_rate_hz} Hz "
                           f"in {path} (use --resample)")
        clip = resample(clip, CANONICAL_RATE)
    return clip


def cmd_analyze(args, config: CliConfig) -> int:
    params = analyze(_load_input(args.input, config), config.analysis_config())
    dump_params(params, args.output)
    f0 = params.f0.f0_hz
    voiced = f0 > 0
    print(f"frames\t{len(f0)}")
    print(f"voiced_ratio\t{voiced.mean():.4f}")
    print(f"mean_voiced_f0\t{f0[voiced].mean():.3f}" if voiced.any() else "mean_voiced_f0\tnan")
    return EXIT_OK


def cmd_synth(args, config: CliConfig) -> int:
    clip = synthesize(load_params(args.params), seed=config.seed)
    save_wav(clip, args.output)
    print(f"samples\t{len(clip)}")
    return EXIT_OK


def cmd_index(args, config: CliConfig) -> int:
    index = build_index(args.manifest, config.analysis_config(donors=True), config.workers)
    save_index(index, args.output)
    for donor_id, reason in index.rejected:
        print(f"rejected {donor_id}: {reason}", file=sys.stderr)
    for record in index:
        print(f"{record.donor_id}\t{record.gender.value}\t{record.mean_voiced_f0_hz:.3f}")
    return EXIT_OK


def cmd_convert(args, config: CliConfig) -> int:
    speech = _load_input(args.input, config)
    index = load_index(args.index)
    result = convert_detailed(speech, args.gender, index, config.analysis_config(),
                              TransplantPolicy(), config.selection, config.seed)
    save_wav(result.clip, args.output)
    print(result.donor.donor_id)
    return EXIT_OK


def _parse_factors(text: str) -> list[float]:
    try:
        return [float(f) for f in text.split(",") if f.strip()]
    except ValueError:
        raise ValueError(f"invalid --speed-factors {text!r}") from None


def cmd_batch(args, config: CliConfig) -> int:
    index = load_index(args.index)
    report = batch_augment(args.manifest, index, config.analysis_config(), TransplantPolicy(),
                           config.selection, _parse_factors(args.speed_factors),
                           config.seed, config.workers)
    if args.report:
        report.write(args.report)
    else:
        sys.stdout.write(report.to_tsv())
    n_ok = len(report) - report.n_errors
    print(f"{n_ok}/{len(report)} outputs written", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_PARTIAL


def cmd_perturb(args, config: CliConfig) -> int:
    save_wav(speed_perturb(load_wav(args.input), args.factor), args.output)
    return EXIT_OK


def cmd_mini_corpus(args, config: CliConfig) -> int:
    paths = write_mini_corpus(args.directory)
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "synth": cmd_synth,
    "index-donors": cmd_index,
    "convert": cmd_convert,
    "batch": cmd_batch,
    "perturb": cmd_perturb,
    "mini-corpus": cmd_mini_corpus,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](args, config)
    except (V2SError, OSError, ValueError) as exc:
        print(f"v2s {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
