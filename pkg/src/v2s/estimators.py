"""scikit-learn style wrappers around the functional API.

These make the vocoder and the converter usable inside sklearn tooling
(``clone``, ``get_params``/``set_params``, pipelines). Every estimator is a
thin shell: the work happens in :mod:`v2s.analysis`, :mod:`v2s.donors` and
:mod:`v2s.pipeline`.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_clips, check_genders, check_index, check_queries
from .analysis import analyze
from .donors import select_donor
from .params import AnalysisConfig, VocoderParams
from .pipeline import TransplantPolicy, convert_detailed
from .synthesis import synthesize


class _AnalysisParamsMixin:
    def _analysis_config(self) -> AnalysisConfig:
        return AnalysisConfig(f0_floor_hz=self.f0_floor_hz, f0_ceil_hz=self.f0_ceil_hz,
                              frame_period_ms=self.frame_period_ms, fft_size=self.fft_size)


class WorldAnalyzer(_AnalysisParamsMixin, TransformerMixin, BaseEstimator):
    """Clips -> VocoderParams; ``inverse_transform`` resynthesizes.

    Stateless: ``fit`` only validates the configuration.
    """

    def __init__(self, f0_floor_hz=60.0, f0_ceil_hz=500.0, frame_period_ms=5.0,
                 fft_size=1024, seed=0):
        self.f0_floor_hz = f0_floor_hz
        self.f0_ceil_hz = f0_ceil_hz
        self.frame_period_ms = frame_period_ms
        self.fft_size = fft_size
        self.seed = seed

    def fit(self, X=None, y=None):
        self.config_ = self._analysis_config()
        return self

    def transform(self, X) -> list[VocoderParams]:
        check_is_fitted(self, "config_")
        return [analyze(clip, self.config_) for clip in check_clips(X)]

    def inverse_transform(self, X):
        return [synthesize(p, seed=self.seed) for p in X]


class DonorSelector(BaseEstimator):
    """Fit on donors, predict a donor_id per ``(gender, target_mean_f0_hz)`` row."""

    def __init__(self, selection="f0_map", seed=0):
        self.selection = selection
        self.seed = seed

    def fit(self, X, y=None):
        self.index_ = check_index(X)
        if len(self.index_) == 0:
            raise ValueError("cannot fit on an empty donor set")
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "index_")
        picks = [select_donor(self.index_, g, f0, self.selection, self.seed)
                 for g, f0 in check_queries(X)]
        return np.array([r.donor_id for r in picks], dtype=object)


class V2SConverter(_AnalysisParamsMixin, TransformerMixin, BaseEstimator):
    """Speech clips -> singing clips, given a fitted donor set.

    ``transform(X, genders)`` takes one gender label (or one per clip) and
    leaves the chosen donors in ``donor_ids_``.
    """

    def __init__(self, selection="f0_map", seed=0, f0_floor_hz=60.0, f0_ceil_hz=500.0,
                 frame_period_ms=5.0, fft_size=1024):
        self.selection = selection
        self.seed = seed
        self.f0_floor_hz = f0_floor_hz
        self.f0_ceil_hz = f0_ceil_hz
        self.frame_period_ms = frame_period_ms
        self.fft_size = fft_size

    def fit(self, X, y=None):
        self.index_ = check_index(X)
        self.config_ = self._analysis_config()
        return self

    def transform(self, X, genders="male"):
        check_is_fitted(self, ["index_", "config_"])
        clips = check_clips(X)
        results = [convert_detailed(c, g, self.index_, self.config_, TransplantPolicy(),
                                    self.selection, self.seed)
                   for c, g in zip(clips, check_genders(genders, len(clips)))]
        self.donor_ids_ = np.array([r.donor.donor_id for r in results], dtype=object)
        return [r.clip for r in results]
