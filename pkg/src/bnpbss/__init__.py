"""Determined blind source separation with adaptive-complexity source models.

Three algorithms behind one pipeline: auxiliary-function IVA, fixed-rank
ILRMA, and a variational Bayesian non-parametric model that starts from a
large basis budget and prunes per-basis reliabilities, removing the need
to tune the NMF rank per source.
"""

from .audio_io import read_wav, resample, write_wav
from .bss_eval import EvalScores, decompose, evaluate
from .core import (
    DemixingStack,
    Diagnostics,
    MultichannelSignal,
    SeparationConfig,
    Spectrogram,
    power_spectrogram,
)
from .estimators import ILRMA, AuxIVA, VBNonparametric
from .gig import GigMoments, GigParams, gig_mean_and_inv, gig_moments, log_bessel_k
from .mixgen import MixSpec, ToySourceSpec, convolve_mix, nmf_source_pair, synth_exponential_rir, synth_nmf_source
from .separator import SeparationResult, cost_trace, separate
from .stft import StftPlan, hamming_plan, istft, plan_from_ms, stft

__version__ = "0.1.0"

__all__ = [
    "AuxIVA",
    "DemixingStack",
    "Diagnostics",
    "EvalScores",
    "GigMoments",
    "GigParams",
    "ILRMA",
    "MixSpec",
    "MultichannelSignal",
    "SeparationConfig",
    "SeparationResult",
    "Spectrogram",
    "StftPlan",
    "ToySourceSpec",
    "VBNonparametric",
    "convolve_mix",
    "cost_trace",
    "decompose",
    "evaluate",
    "gig_mean_and_inv",
    "gig_moments",
    "hamming_plan",
    "istft",
    "log_bessel_k",
    "nmf_source_pair",
    "plan_from_ms",
    "power_spectrogram",
    "read_wav",
    "resample",
    "separate",
    "stft",
    "synth_exponential_rir",
    "synth_nmf_source",
    "write_wav",
]
