import numpy as np
import pytest

from bnpbss.bss_eval import evaluate
from bnpbss.core import MultichannelSignal, SeparationConfig
from bnpbss.separator import SeparationResult, cost_trace, separate

RATE = 16000
FAST = dict(window_ms=64.0, hop_ms=16.0, iterations=10)


def modulated_noise_mixture(seconds=4.0, seed=0):
    """Two amplitude-modulated noise sources, instantaneous mixing."""
    rng = np.random.default_rng(seed)
    n = int(seconds * RATE)
    t = np.arange(n) / RATE
    s1 = rng.standard_normal(n) * (0.2 + np.abs(np.sin(2 * np.pi * 0.7 * t)))
    s2 = rng.standard_normal(n) * (0.2 + np.abs(np.sin(2 * np.pi * 1.3 * t + 1.0)))
    s1 /= np.abs(s1).max()
    s2 /= np.abs(s2).max()
    A = np.array([[1.0, 0.6], [0.4, 1.0]])
    mix = MultichannelSignal(samples=A @ np.vstack([s1, s2]), sample_rate=RATE)
    return mix, np.vstack([s1, s2])


class TestPipelineBasics:
    def test_mono_input_rejected(self):
        sig = MultichannelSignal(samples=np.random.default_rng(0).standard_normal((1, 32000)),
                                 sample_rate=RATE)
        with pytest.raises(ValueError):
            separate(sig, SeparationConfig(**FAST))

    def test_ref_channel_validated(self):
        mix, _ = modulated_noise_mixture(1.0)
        with pytest.raises(ValueError):
            separate(mix, SeparationConfig(ref_channel=5, **FAST))

    def test_result_shape_and_length(self):
        mix, _ = modulated_noise_mixture(1.0)
        res = separate(mix, SeparationConfig(algorithm="auxiva", **FAST))
        assert isinstance(res, SeparationResult)
        assert res.sources.channels == 2
        assert res.sources.num_samples == mix.num_samples
        assert res.diagnostics.cost_trace.shape == (10,)
        assert res.diagnostics.active_bases.shape == (10, 2)

    def test_projection_back_identity_on_final_spectra(self):
        # sum of projected images equals the reference mixture channel
        from bnpbss.demixing import demix_data, project_back
        from bnpbss.stft import plan_from_ms, stft

        mix, _ = modulated_noise_mixture(1.0, seed=3)
        cfg = SeparationConfig(algorithm="auxiva", **FAST)
        res = separate(mix, cfg)
        plan = plan_from_ms(cfg.window_ms, cfg.hop_ms, RATE)
        X = stft(mix, plan)
        Y = demix_data(res.demixing.matrices, X.data)
        img = project_back(res.demixing.matrices, Y, cfg.ref_channel)
        np.testing.assert_allclose(img.sum(axis=2), X.data[:, :, 0], atol=1e-10)


class TestDeterminism:
    @pytest.mark.parametrize("algo", ["auxiva", "ilrma", "vb_nonparametric"])
    def test_same_seed_bit_identical(self, algo):
        mix, _ = modulated_noise_mixture(1.5, seed=4)
        cfg = SeparationConfig(algorithm=algo, K=4, seed=7, **FAST)
        a = separate(mix, cfg)
        b = separate(mix, cfg)
        assert np.array_equal(a.sources.samples, b.sources.samples)
        assert np.array_equal(a.diagnostics.cost_trace, b.diagnostics.cost_trace)
        assert np.array_equal(a.demixing.matrices, b.demixing.matrices)

    def test_different_seeds_differ_for_random_init_models(self):
        mix, _ = modulated_noise_mixture(1.5, seed=4)
        a = separate(mix, SeparationConfig(algorithm="ilrma", K=4, seed=0, **FAST))
        b = separate(mix, SeparationConfig(algorithm="ilrma", K=4, seed=1, **FAST))
        assert not np.array_equal(a.diagnostics.cost_trace, b.diagnostics.cost_trace)


class TestSeparationQuality:
    def test_identity_mixing_keeps_streams_separated(self):
        # mixture already separated: 10 iterations must not break it.
        # Note: with exact identity mixing, the cross source's image at
        # the reference channel is identically zero, so this oracle case
        # is judged on the raw demixed streams instead.
        from bnpbss.core import Spectrogram
        from bnpbss.demixing import demix_data
        from bnpbss.stft import istft, plan_from_ms, stft

        rng = np.random.default_rng(5)
        n = 2 * RATE
        t = np.arange(n) / RATE
        s1 = rng.standard_normal(n) * (0.3 + np.abs(np.sin(2 * np.pi * 1.1 * t)))
        s2 = rng.standard_normal(n) * (0.3 + np.abs(np.cos(2 * np.pi * 0.5 * t)))
        refs = np.vstack([s1 / np.abs(s1).max(), s2 / np.abs(s2).max()])
        mix = MultichannelSignal(samples=refs.copy(), sample_rate=RATE)
        plan = plan_from_ms(64.0, 16.0, RATE)
        X = stft(mix, plan)
        for algo in ("auxiva", "ilrma", "vb_nonparametric"):
            res = separate(mix, SeparationConfig(algorithm=algo, K=4, **FAST))
            Y = demix_data(res.demixing.matrices, X.data)
            spec = Spectrogram(data=Y, window_len_samples=X.window_len_samples,
                               hop_samples=X.hop_samples, sample_rate=RATE)
            raw = istft(spec, plan, n)
            scores = evaluate(raw.samples, refs, filter_len=64)
            assert np.all(scores.sir >= 20.0), f"{algo}: {scores.sir}"

    @pytest.mark.parametrize("algo", ["auxiva", "ilrma", "vb_nonparametric"])
    def test_modulated_noise_separation(self, algo):
        mix, refs = modulated_noise_mixture(4.0, seed=6)
        cfg = SeparationConfig(algorithm=algo, K=4, iterations=30,
                               window_ms=64.0, hop_ms=16.0, seed=0)
        res = separate(mix, cfg)
        scores = evaluate(res.sources.samples, refs, filter_len=64)
        assert np.all(scores.sir >= 15.0), f"{algo}: {scores.sir}"


class TestDiagnostics:
    def test_cost_trace_length_and_finite(self):
        mix, _ = modulated_noise_mixture(1.0, seed=7)
        res = separate(mix, SeparationConfig(algorithm="vb_nonparametric", K=4, **FAST))
        trace = cost_trace(res)
        assert trace.shape == (10,)
        assert np.all(np.isfinite(trace))

    def test_auxiva_cost_non_increasing(self):
        mix, _ = modulated_noise_mixture(2.0, seed=8)
        cfg = SeparationConfig(algorithm="auxiva", iterations=25, window_ms=64.0,
                               hop_ms=16.0, seed=0)
        trace = cost_trace(separate(mix, cfg))
        assert np.all(np.diff(trace) <= 1e-9 * np.abs(trace[:-1]))

    def test_vb_active_bases_non_increasing(self):
        mix, refs = modulated_noise_mixture(2.0, seed=9)
        cfg = SeparationConfig(algorithm="vb_nonparametric", K=10, iterations=25,
                               window_ms=64.0, hop_ms=16.0, seed=0, prune_burn_in=5)
        res = separate(mix, cfg)
        counts = res.diagnostics.active_bases
        assert np.all(np.diff(counts, axis=0) <= 0)
        assert np.all(counts >= 1)
        assert np.all(counts[0] <= 10)
