"""Voice-to-singing conversion by F0-contour transplant on a vocoder.

Speech is decomposed into F0, spectral envelope and aperiodicity; the F0
contour of a gender-matched singing donor with the closest mean F0 replaces
the speech contour, and the result is resynthesized.
"""
__version__ = "0.1.0"

from .analysis import analyze, estimate_aperiodicity, estimate_envelope, estimate_f0, f0_candidates
from .audio import AudioClip, FrameGrid, frame_grid_for, load_wav, resample, save_wav
from .donors import (DonorIndex, DonorRecord, Gender, Selection, build_index, load_index,
                     mean_voiced_f0, save_index, select_donor)
from .params import (AnalysisConfig, Aperiodicity, F0Contour, SpectralEnvelope, VocoderParams,
                     dump_params, load_params)
from .pipeline import (ConversionReport, TransplantPolicy, batch_augment, convert,
                       speed_perturb, transplant_f0)
from .synthesis import pulse_positions, synthesize
