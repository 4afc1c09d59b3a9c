"""Short-time Fourier analysis/synthesis with weighted overlap-add.

Analysis windows a periodic (DFT-even) Hamming window by default; synthesis
divides the overlap-added product of window and inverse frames by the summed
squared window, which makes istft(stft(x)) exact on the interior without
requiring a strict COLA hop.  One-sided spectra: bins 1..I-2 are doubled by
conjugate symmetry during synthesis (irfft).
"""

from dataclasses import dataclass

import numpy as np

from .core import MultichannelSignal, Spectrogram


@dataclass(frozen=True)
class StftPlan:
    """Analysis window (length L), hop in samples, fft_len = L."""

    window: np.ndarray
    hop: int

    def __post_init__(self):
        win = np.asarray(self.window, dtype=np.float64)
        if win.ndim != 1 or win.size < 2:
            raise ValueError("window must be a 1-D vector of length >= 2")
        if np.any(win <= 0.0) or np.any(win > 1.08):
            raise ValueError("window entries must lie in (0, 1.08]")
        if not (0 < self.hop <= win.size):
            raise ValueError(f"need 0 < hop <= window length, got hop={self.hop}, L={win.size}")
        win = win.copy()
        win.setflags(write=False)
        object.__setattr__(self, "window", win)

    @property
    def window_len(self):
        return self.window.size

    @property
    def fft_len(self):
        return self.window.size

    @property
    def bins(self):
        return self.window.size // 2 + 1


def hamming_plan(window_len: int, hop: int) -> StftPlan:
    """Periodic Hamming window plan (0.54 - 0.46 cos(2 pi n / L))."""
    n = np.arange(window_len)
    return StftPlan(window=0.54 - 0.46 * np.cos(2.0 * np.pi * n / window_len), hop=hop)


def plan_from_ms(window_ms: float, hop_ms: float, sample_rate: int) -> StftPlan:
    """Hamming plan from durations; window length rounded to an even sample count."""
    window_len = 2 * max(1, round(window_ms * sample_rate / 2000.0))
    hop = max(1, round(hop_ms * sample_rate / 1000.0))
    return hamming_plan(window_len, min(hop, window_len))


def _frame_starts(num_samples: int, window_len: int, hop: int) -> np.ndarray:
    # Tail is zero-padded so the last partial frame is included.
    n_hops = -(-(num_samples - window_len) // hop)  # ceil
    return hop * np.arange(n_hops + 1)


def stft(signal: MultichannelSignal, plan: StftPlan) -> Spectrogram:
    """Analyze a multichannel signal into an (I, J, M) complex tensor."""
    L, hop = plan.window_len, plan.hop
    x = signal.samples
    if x.shape[1] < L:
        raise ValueError(f"signal of {x.shape[1]} samples is shorter than one window ({L})")
    starts = _frame_starts(x.shape[1], L, hop)
    padded_len = starts[-1] + L
    padded = np.zeros((x.shape[0], padded_len))
    padded[:, : x.shape[1]] = x
    frames = padded[:, starts[:, None] + np.arange(L)]  # (M, J, L)
    spec = np.fft.rfft(frames * plan.window, axis=2)  # (M, J, I)
    return Spectrogram(
        data=spec.transpose(2, 1, 0),
        window_len_samples=L,
        hop_samples=hop,
        sample_rate=signal.sample_rate,
    )


def istft(spec: Spectrogram, plan: StftPlan, out_len: int) -> MultichannelSignal:
    """Weighted overlap-add synthesis back to (streams, out_len) samples."""
    L, hop = plan.window_len, plan.hop
    if spec.window_len_samples != L or spec.hop_samples != hop:
        raise ValueError(
            f"spectrogram was produced with window {spec.window_len_samples}/hop "
            f"{spec.hop_samples}, plan has {L}/{hop}"
        )
    if out_len < 1:
        raise ValueError("out_len must be >= 1")
    J, M = spec.frames, spec.streams
    starts = hop * np.arange(J)
    total = starts[-1] + L
    frames = np.fft.irfft(spec.data, n=L, axis=0)  # (L, J, M)
    acc = np.zeros((total, M))
    norm = np.zeros(total)
    win = plan.window
    wsq = win * win
    for j in range(J):
        s = starts[j]
        acc[s : s + L] += win[:, None] * frames[:, j, :]
        norm[s : s + L] += wsq
    out = np.zeros((total, M))
    covered = norm > 1e-12
    out[covered] = acc[covered] / norm[covered, None]
    if out_len <= total:
        out = out[:out_len]
    else:
        out = np.vstack([out, np.zeros((out_len - total, M))])
    return MultichannelSignal(samples=out.T, sample_rate=spec.sample_rate)
