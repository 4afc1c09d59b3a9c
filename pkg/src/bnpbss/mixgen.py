"""Synthetic mixtures: convolutive/instantaneous mixing, exponential-decay
room impulse responses, and low-rank toy sources for adaptivity experiments.

Toy sources are defined in the spectrogram-power domain: a source of rank R
draws nonnegative templates T (bins x R) and activations V (R x frames) and
synthesizes time samples from sqrt(T @ V) with independent random phases
through the inverse STFT.  Synthesis uses a rectangular window with hop
equal to the window length, so re-analysis on the same grid reproduces the
drawn power exactly and the source's spectrogram rank equals R.

Template design: each basis owns one contiguous dominance sub-band filled
with heavy-tailed gamma draws, plus a smooth low-level full-band floor.
The floor keeps every frequency populated by every source, which keeps the
per-bin mixture covariances full rank; purely disjoint supports make the
demixing problem degenerate.  Activations are epoch-level gains (drawn per
~0.6 s epoch, interpolated) co-modulated by a shared source envelope, so
variance dynamics survive long analysis windows and a source's bases stay
statistically grouped.
"""

from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .core import MultichannelSignal, Spectrogram
from .stft import StftPlan, istft

RIR_DECAY_LN = 6.9077  # exp(-6.9077) = 1e-3: -60 dB energy at T60

TEMPLATE_SPARSITY = 0.2   # gamma shape of template draws; smaller = spikier
TEMPLATE_FLOOR = 0.04     # full-band floor level relative to dominance bands
EPOCH_SECONDS = 0.6       # activation epoch length
EPOCH_SHAPE = 0.5         # gamma shape of epoch gains
ENVELOPE_FLOOR = 0.05


@dataclass(frozen=True)
class MixSpec:
    """Sources plus either per-source RIRs (each (mics, taps)) or an
    instantaneous mixing matrix (mics, sources)."""

    sources: tuple
    rirs: tuple | None = None
    matrix: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.rirs is None) == (self.matrix is None):
            raise ValueError("provide exactly one of rirs or matrix")
        if len(self.sources) < 1:
            raise ValueError("need at least one source")
        for s in self.sources:
            if s.channels != 1:
                raise ValueError("sources must be mono")


@dataclass(frozen=True)
class ToySourceSpec:
    """Low-rank spectrogram-domain source description."""

    rank: int
    duration: float
    sample_rate: int = 16000
    i_bins: int = 257
    band: tuple = (0.05, 0.95)
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if not (0.0 <= self.band[0] < self.band[1] <= 1.0):
            raise ValueError("band must satisfy 0 <= lo < hi <= 1")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.i_bins < 9:
            raise ValueError("need at least 9 frequency bins")


def synthesis_plan(spec: ToySourceSpec) -> StftPlan:
    """Non-overlapping rectangular analysis grid matching the generator."""
    window_len = 2 * (spec.i_bins - 1)
    return StftPlan(window=np.ones(window_len), hop=window_len)


def convolve_mix(spec: MixSpec) -> MultichannelSignal:
    """Mix sources through RIRs (full convolution truncated to source
    length) or an instantaneous matrix."""
    length = spec.sources[0].num_samples
    rate = spec.sources[0].sample_rate
    for s in spec.sources:
        if s.num_samples != length or s.sample_rate != rate:
            raise ValueError("sources must share length and sample rate")
    stacked = np.vstack([s.samples[0] for s in spec.sources])  # (N, len)
    n_src = stacked.shape[0]

    if spec.matrix is not None:
        A = np.asarray(spec.matrix, dtype=np.float64)
        if A.ndim != 2 or A.shape[1] != n_src:
            raise ValueError(f"mixing matrix must be (mics, {n_src}), got {A.shape}")
        return MultichannelSignal(samples=A @ stacked, sample_rate=rate)

    if len(spec.rirs) != n_src:
        raise ValueError("need one RIR set per source")
    rirs = [np.atleast_2d(np.asarray(r, dtype=np.float64)) for r in spec.rirs]
    mics = rirs[0].shape[0]
    for r in rirs:
        if r.shape[0] != mics:
            raise ValueError("all RIR sets must have the same microphone count")
        if r.shape[1] >= length:
            raise ValueError("RIR longer than the source signal")
    out = np.zeros((mics, length))
    for n in range(n_src):
        for m in range(mics):
            out[m] += sp_signal.fftconvolve(stacked[n], rirs[n][m])[:length]
    return MultichannelSignal(samples=out, sample_rate=rate)


def synth_exponential_rir(t60: float, taps: int, seed: int, sample_rate: int) -> np.ndarray:
    """Exponential-envelope noise RIR with a unit direct-path tap."""
    if t60 <= 0:
        raise ValueError("t60 must be positive")
    if taps < 1:
        raise ValueError("need at least one tap")
    rng = np.random.default_rng(seed)
    t = np.arange(taps) / sample_rate
    env = np.exp(-RIR_DECAY_LN * t / t60)
    h = rng.standard_normal(taps) * env * 0.5
    h[0] = 1.0
    return h


def _epoch_envelope(frames, frame_seconds, epoch_seconds, shape, rng):
    """Piecewise-linear gains drawn once per epoch; strictly positive."""
    n_epochs = max(2, int(np.ceil(frames * frame_seconds / epoch_seconds)) + 1)
    values = rng.gamma(shape, 1.0, n_epochs) + ENVELOPE_FLOOR
    grid = np.linspace(0.0, frames - 1.0, n_epochs)
    return np.interp(np.arange(frames), grid, values)


def _spectral_templates(spec: ToySourceSpec, rng) -> np.ndarray:
    """(I, rank) heavy-tailed templates, one dominance sub-band per basis."""
    I = spec.i_bins
    lo = max(2, int(spec.band[0] * I))
    hi = min(I - 2, max(lo + 2 * spec.rank, int(spec.band[1] * I)))
    band_w = (hi - lo) // spec.rank
    T = np.zeros((I, spec.rank))
    for r in range(spec.rank):
        fine = rng.gamma(TEMPLATE_SPARSITY, 1.0, I) + 1e-9
        dominance = np.zeros(I)
        dominance[lo + r * band_w : lo + (r + 1) * band_w] = 1.0
        log_floor = np.convolve(rng.standard_normal(I) * 2.0, np.ones(31) / 31.0, mode="same")
        floor = TEMPLATE_FLOOR * np.exp(log_floor - log_floor.max())
        column = fine * dominance + floor * rng.gamma(0.5, 1.0, I)
        column[:2] *= 1e-3
        column[-2:] *= 1e-3
        T[:, r] = column
    return T


def _activations(spec: ToySourceSpec, frames, rng) -> np.ndarray:
    """(rank, frames) epoch gains co-modulated by a shared source envelope."""
    frame_seconds = 2.0 * (spec.i_bins - 1) / spec.sample_rate
    V = np.vstack([
        _epoch_envelope(frames, frame_seconds, EPOCH_SECONDS, EPOCH_SHAPE, rng)
        for _ in range(spec.rank)
    ])
    shared = _epoch_envelope(frames, frame_seconds, 1.5 * EPOCH_SECONDS, 1.0, rng)
    shared /= max(shared.mean(), 1e-12)
    return V * shared[None, :] + 1e-4


def synth_nmf_source(spec: ToySourceSpec) -> MultichannelSignal:
    """Time-domain source whose spectrogram power on the synthesis grid is
    exactly T @ V (random phases, non-overlapping frames)."""
    rng = np.random.default_rng(spec.seed)
    L = 2 * (spec.i_bins - 1)
    n_samples = int(round(spec.duration * spec.sample_rate))
    if n_samples < L:
        raise ValueError("duration shorter than one synthesis window")
    frames = 1 + -(-(n_samples - L) // L)
    T = _spectral_templates(spec, rng)
    V = _activations(spec, frames, rng)
    power = T @ V
    phase = rng.uniform(0.0, 2.0 * np.pi, power.shape)
    sgram = Spectrogram(
        data=(np.sqrt(power) * np.exp(1j * phase))[:, :, None],
        window_len_samples=L,
        hop_samples=L,
        sample_rate=spec.sample_rate,
    )
    sig = istft(sgram, synthesis_plan(spec), n_samples)
    peak = np.max(np.abs(sig.samples))
    return MultichannelSignal(samples=0.7 * sig.samples / peak, sample_rate=spec.sample_rate)


def nmf_source_pair(rank_a, rank_b, duration, sample_rate=16000, i_bins=257, seed=0):
    """Two sources with disjoint dominance bands and the given ranks."""
    a = synth_nmf_source(ToySourceSpec(
        rank=rank_a, duration=duration, sample_rate=sample_rate,
        i_bins=i_bins, band=(0.04, 0.46), seed=seed,
    ))
    b = synth_nmf_source(ToySourceSpec(
        rank=rank_b, duration=duration, sample_rate=sample_rate,
        i_bins=i_bins, band=(0.52, 0.94), seed=seed + 1,
    ))
    return a, b
