"""Shared domain types and configuration.

Array conventions used throughout the package:

* time-domain audio is ``(channels, num_samples)`` float64,
* spectrograms are ``(bins I, frames J, streams M)`` complex128,
* demixing matrices are ``(bins I, M, M)`` complex128 where row ``m`` of
  ``W[i]`` is the conjugate-transposed demixing vector for stream ``m``.

Every module states its index order at the boundary; nothing ever
transposes silently.
"""

from dataclasses import dataclass
import numpy as np

ALGORITHMS = ("auxiva", "ilrma", "vb_nonparametric")


def _frozen_array(x, dtype):
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MultichannelSignal:
    """Time-domain audio: ``samples`` is (channels, num_samples)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = _frozen_array(self.samples, np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
            arr.setflags(write=False)
        if arr.ndim != 2:
            raise ValueError(f"samples must be 2-D (channels, num_samples), got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"empty signal: shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal contains NaN or Inf samples")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def num_samples(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.num_samples / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    """Complex STFT tensor, shape (bins I, frames J, streams M)."""

    data: np.ndarray
    window_len_samples: int
    hop_samples: int
    sample_rate: int

    def __post_init__(self):
        arr = _frozen_array(self.data, np.complex128)
        if arr.ndim != 3:
            raise ValueError(f"spectrogram data must be (bins, frames, streams), got ndim={arr.ndim}")
        expected_bins = self.window_len_samples // 2 + 1
        if arr.shape[0] != expected_bins:
            raise ValueError(
                f"bin count {arr.shape[0]} inconsistent with window length "
                f"{self.window_len_samples} (expected {expected_bins})"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("spectrogram contains non-finite entries")
        object.__setattr__(self, "data", arr)

    @property
    def bins(self):
        return self.data.shape[0]

    @property
    def frames(self):
        return self.data.shape[1]

    @property
    def streams(self):
        return self.data.shape[2]


@dataclass(frozen=True)
class DemixingStack:
    """Per-frequency demixing matrices, shape (bins I, M, M)."""

    matrices: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.matrices, np.complex128)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"demixing stack must be (bins, M, M), got shape {arr.shape}")
        dets = np.abs(np.linalg.det(arr))
        if np.any(dets <= 0.0) or not np.all(np.isfinite(dets)):
            bad = int(np.argmin(dets))
            raise ValueError(f"singular demixing matrix at bin {bad} (|det| = {dets[bad]:g})")
        object.__setattr__(self, "matrices", arr)

    @property
    def bins(self):
        return self.matrices.shape[0]

    @property
    def streams(self):
        return self.matrices.shape[1]


@dataclass(frozen=True)
class SeparationConfig:
    """Knobs for a separation run.

    Defaults reproduce the reference operating point: K=30 bases per
    source, a0=b0=0.1, c0=1/K, 100 iterations, 512 ms Hamming window
    shifted every 128 ms, identity demixing init.
    """

    algorithm: str = "vb_nonparametric"
    K: int = 30
    a0: float = 0.1
    b0: float = 0.1
    c0: float | None = None
    iterations: int = 100
    seed: int = 0
    window_ms: float = 512.0
    hop_ms: float = 128.0
    ref_channel: int = 0
    prune_threshold: float = 1e-3
    prune_burn_in: int = 10

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.c0 is None:
            object.__setattr__(self, "c0", 1.0 / self.K)
        for name in ("a0", "b0", "c0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 <= self.prune_threshold < 1.0):
            raise ValueError("prune_threshold must lie in [0, 1)")
        if self.prune_burn_in < 0:
            raise ValueError("prune_burn_in must be >= 0")
        if self.window_ms <= 0 or self.hop_ms <= 0 or self.hop_ms > self.window_ms:
            raise ValueError("need 0 < hop_ms <= window_ms")
        if self.ref_channel < 0:
            raise ValueError("ref_channel must be >= 0")


@dataclass(frozen=True)
class Diagnostics:
    """Per-iteration traces recorded during a separation run."""

    cost_trace: np.ndarray
    active_bases: np.ndarray  # (iterations, sources); -1 where not applicable
    wall_time: float = 0.0

    def __post_init__(self):
        cost = _frozen_array(self.cost_trace, np.float64)
        active = _frozen_array(self.active_bases, np.int64)
        if active.ndim != 2 or active.shape[0] != cost.shape[0]:
            raise ValueError("active_bases must be (iterations, sources) matching cost_trace length")
        object.__setattr__(self, "cost_trace", cost)
        object.__setattr__(self, "active_bases", active)

    @property
    def iterations(self):
        return self.cost_trace.shape[0]


def power_spectrogram(spec: Spectrogram, stream: int) -> np.ndarray:
    """Squared magnitudes of one stream, shape (bins I, frames J)."""
    m = spec.streams
    if not (-m <= stream < m):
        raise IndexError(f"stream {stream} out of range for {m} streams")
    slab = spec.data[:, :, stream]
    return (slab.real ** 2 + slab.imag ** 2)
