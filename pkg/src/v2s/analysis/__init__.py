"""Decomposition of a clip into F0, spectral envelope and aperiodicity."""
from ..audio import AudioClip
from ..params import AnalysisConfig, VocoderParams
from .aperiodicity import estimate_aperiodicity
from .envelope import estimate_envelope
from .f0 import F0Candidate, estimate_f0, f0_candidates


def analyze(clip: AudioClip, config: AnalysisConfig | None = None) -> VocoderParams:
    config = config or AnalysisConfig()
    f0 = estimate_f0(clip, config)
    return VocoderParams(f0, estimate_envelope(clip, f0, config),
                         estimate_aperiodicity(clip, f0, config))


__all__ = ["F0Candidate", "analyze", "estimate_aperiodicity", "estimate_envelope",
           "estimate_f0", "f0_candidates"]
