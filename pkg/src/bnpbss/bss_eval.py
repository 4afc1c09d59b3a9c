"""SDR / SIR / SAR with least-squares distortion filters and permutation search.

An estimate is decomposed against the references as

    estimate = s_target + e_interf + e_artif

where s_target is its projection onto the span of the true source's
delayed copies (0..filter_len-1 taps), e_interf extends the projection to
all references, and e_artif is the remainder.  The decomposition is exact
by construction, which the tests assert.  All projections are computed
with FFT cross-correlations and block-Toeplitz Gram matrices.
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import fftconvolve

DB_CAP = 250.0
DEFAULT_FILTER_LEN = 512
RIDGE = 1e-10
MAX_PERMUTATION_SOURCES = 4


@dataclass(frozen=True)
class EvalScores:
    """Per-estimate decibel scores; permutation[i] is the reference index
    matched to estimate i."""

    sdr: np.ndarray
    sir: np.ndarray
    sar: np.ndarray
    permutation: tuple

    def __post_init__(self):
        for name in ("sdr", "sir", "sar"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))


def _db(num, den):
    if num <= 0.0:
        return -DB_CAP
    if den <= 0.0:
        return DB_CAP
    return float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))


class _ProjectionContext:
    """Shared Gram machinery for one reference set and filter length."""

    def __init__(self, references, filter_len):
        refs = np.atleast_2d(np.asarray(references, dtype=np.float64))
        self.refs = refs
        self.flen = filter_len
        self.n_src, self.n = refs.shape
        self.total = self.n + filter_len - 1
        n_fft = 1 << int(np.ceil(np.log2(self.n + filter_len)))
        self.n_fft = n_fft
        self.sf = np.fft.rfft(refs, n_fft)
        G = np.zeros((self.n_src * filter_len, self.n_src * filter_len))
        for i in range(self.n_src):
            for j in range(i, self.n_src):
                ssf = np.fft.irfft(self.sf[i] * self.sf[j].conj(), n_fft)
                block = toeplitz(
                    np.concatenate(([ssf[0]], ssf[-1 : -filter_len : -1])), ssf[:filter_len]
                )
                G[i * filter_len : (i + 1) * filter_len, j * filter_len : (j + 1) * filter_len] = block
                if i != j:
                    G[j * filter_len : (j + 1) * filter_len, i * filter_len : (i + 1) * filter_len] = block.T
        self.G = G

    def _solve(self, G, d):
        try:
            coeffs = np.linalg.solve(G, d)
            if not np.all(np.isfinite(coeffs)):
                raise np.linalg.LinAlgError
            return coeffs
        except np.linalg.LinAlgError:
            warnings.warn(
                "rank-deficient projection Gram matrix; applying ridge regularization",
                RuntimeWarning,
                stacklevel=3,
            )
            ridge = RIDGE * max(np.max(np.diag(G)), 1.0)
            return np.linalg.solve(G + ridge * np.eye(G.shape[0]), d)

    def _cross(self, estimate):
        """d[(j, tau)] = sum_t estimate(t) ref_j(t - tau)."""
        ef = np.fft.rfft(estimate, self.n_fft)
        d = np.zeros(self.n_src * self.flen)
        for j in range(self.n_src):
            ssef = np.fft.irfft(self.sf[j] * ef.conj(), self.n_fft)
            d[j * self.flen : (j + 1) * self.flen] = np.concatenate(
                ([ssef[0]], ssef[-1 : -self.flen : -1])
            )
        return d

    def _filter_sum(self, coeffs, indices):
        out = np.zeros(self.total)
        for pos, j in enumerate(indices):
            c = coeffs[pos * self.flen : (pos + 1) * self.flen]
            out += fftconvolve(c, self.refs[j])[: self.total]
        return out

    def project(self, estimate, onto):
        """LS projection of ``estimate`` onto the delayed span of refs ``onto``."""
        d_full = self._cross(estimate)
        sel = np.concatenate([np.arange(j * self.flen, (j + 1) * self.flen) for j in onto])
        G_sub = self.G[np.ix_(sel, sel)]
        coeffs = self._solve(G_sub, d_full[sel])
        return self._filter_sum(coeffs, onto)


def decompose(estimate, references, filter_len=DEFAULT_FILTER_LEN, true_index=0, ctx=None):
    """Split ``estimate`` into (s_target, e_interf, e_artif), each padded to
    length len(estimate) + filter_len - 1; the three parts sum to the
    padded estimate exactly."""
    estimate = np.asarray(estimate, dtype=np.float64)
    if ctx is None:
        ctx = _ProjectionContext(references, filter_len)
    if estimate.shape[0] != ctx.n:
        raise ValueError("estimate and references must have equal lengths")
    padded = np.concatenate([estimate, np.zeros(ctx.flen - 1)])
    s_target = ctx.project(estimate, [true_index])
    p_all = ctx.project(estimate, list(range(ctx.n_src)))
    e_interf = p_all - s_target
    e_artif = padded - p_all
    return s_target, e_interf, e_artif


def _scores_for_pair(ctx, estimate, true_index):
    s_target, e_interf, e_artif = decompose(estimate, None, ctx.flen, true_index, ctx)
    target = float(np.sum(s_target**2))
    interf = float(np.sum(e_interf**2))
    artif = float(np.sum(e_artif**2))
    sdr = _db(target, interf + artif)
    sir = _db(target, interf)
    sar = _db(target + interf, artif)
    return sdr, sir, sar


def evaluate(estimates, references, filter_len=DEFAULT_FILTER_LEN) -> EvalScores:
    """Score all estimates, resolving the source permutation by maximizing
    mean SIR over all assignments (at most 4 sources)."""
    est = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    refs = np.atleast_2d(np.asarray(references, dtype=np.float64))
    if est.shape[0] != refs.shape[0]:
        raise ValueError(f"{est.shape[0]} estimates vs {refs.shape[0]} references")
    if est.shape[1] != refs.shape[1]:
        raise ValueError("estimates and references must have equal lengths")
    m = est.shape[0]
    if m > MAX_PERMUTATION_SOURCES:
        raise ValueError(f"permutation search supports at most {MAX_PERMUTATION_SOURCES} sources")
    ctx = _ProjectionContext(refs, filter_len)
    table = np.empty((m, m, 3))
    for i in range(m):
        for j in range(m):
            table[i, j] = _scores_for_pair(ctx, est[i], j)
    best_perm, best_sir = None, -np.inf
    for perm in itertools.permutations(range(m)):
        mean_sir = np.mean([table[i, perm[i], 1] for i in range(m)])
        if mean_sir > best_sir:
            best_sir, best_perm = mean_sir, perm
    sdr = np.array([table[i, best_perm[i], 0] for i in range(m)])
    sir = np.array([table[i, best_perm[i], 1] for i in range(m)])
    sar = np.array([table[i, best_perm[i], 2] for i in range(m)])
    return EvalScores(sdr=sdr, sir=sir, sar=sar, permutation=tuple(best_perm))
