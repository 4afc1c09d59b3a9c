import numpy as np
import pytest

from bnpbss.core import MultichannelSignal
from bnpbss.mixgen import (
    MixSpec,
    ToySourceSpec,
    convolve_mix,
    nmf_source_pair,
    synth_exponential_rir,
    synth_nmf_source,
    synthesis_plan,
)
from bnpbss.source_model import init_nmf_model, is_divergence, nmf_is_update
from bnpbss.stft import hamming_plan, stft

RATE = 16000


def mono(x, rate=RATE):
    return MultichannelSignal(samples=np.asarray(x)[None, :], sample_rate=rate)


class TestConvolveMix:
    def test_identity_matrix_stacks_sources(self):
        rng = np.random.default_rng(0)
        srcs = (mono(rng.standard_normal(1000)), mono(rng.standard_normal(1000)))
        mix = convolve_mix(MixSpec(sources=srcs, matrix=np.eye(2)))
        np.testing.assert_allclose(mix.samples[0], srcs[0].samples[0], atol=0)
        np.testing.assert_allclose(mix.samples[1], srcs[1].samples[0], atol=0)

    def test_single_tap_rir_equals_instantaneous(self):
        rng = np.random.default_rng(1)
        srcs = (mono(rng.standard_normal(500)), mono(rng.standard_normal(500)))
        gains = np.array([[1.0, 0.5], [0.25, 2.0]])
        rirs = tuple(gains[:, n][:, None] for n in range(2))
        via_rir = convolve_mix(MixSpec(sources=srcs, rirs=rirs))
        via_mat = convolve_mix(MixSpec(sources=srcs, matrix=gains))
        np.testing.assert_allclose(via_rir.samples, via_mat.samples, atol=1e-12)

    def test_delayed_delta_shifts_source(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(400)
        delay = 7
        rir = np.zeros((1, 16))
        rir[0, delay] = 1.0
        mix = convolve_mix(MixSpec(sources=(mono(x),), rirs=(rir,)))
        np.testing.assert_allclose(mix.samples[0, delay:], x[:-delay], atol=1e-12)
        np.testing.assert_allclose(mix.samples[0, :delay], 0.0, atol=1e-12)

    def test_linearity_in_sources(self):
        rng = np.random.default_rng(3)
        a, b = rng.standard_normal(300), rng.standard_normal(300)
        rir = synth_exponential_rir(0.05, 64, seed=3, sample_rate=RATE)[None, :]
        mix_a = convolve_mix(MixSpec(sources=(mono(a),), rirs=(rir,)))
        mix_b = convolve_mix(MixSpec(sources=(mono(b),), rirs=(rir,)))
        mix_ab = convolve_mix(MixSpec(sources=(mono(2 * a - 3 * b),), rirs=(rir,)))
        np.testing.assert_allclose(
            mix_ab.samples, 2 * mix_a.samples - 3 * mix_b.samples, atol=1e-10
        )

    def test_dimension_mismatch(self):
        srcs = (mono(np.ones(100)), mono(np.ones(100)))
        with pytest.raises(ValueError):
            convolve_mix(MixSpec(sources=srcs, matrix=np.eye(3)))
        with pytest.raises(ValueError):
            MixSpec(sources=srcs)  # neither rirs nor matrix


class TestSynthRir:
    def test_envelope_reaches_minus_60db_at_t60(self):
        t60, fs = 0.3, RATE
        t = np.arange(int(0.4 * fs)) / fs
        env = np.exp(-6.9077 * t / t60)
        idx = int(round(t60 * fs))
        assert env[idx] == pytest.approx(1e-3, rel=1e-3)

    def test_tiny_t60_is_near_delta(self):
        h = synth_exponential_rir(1e-4, 256, seed=0, sample_rate=RATE)
        tail = np.sum(h[10:] ** 2)
        assert tail <= 1e-4 * np.sum(h**2)

    def test_seed_determinism(self):
        a = synth_exponential_rir(0.3, 4800, seed=42, sample_rate=RATE)
        b = synth_exponential_rir(0.3, 4800, seed=42, sample_rate=RATE)
        assert np.array_equal(a, b)

    def test_unit_direct_path(self):
        h = synth_exponential_rir(0.3, 4800, seed=1, sample_rate=RATE)
        assert h[0] == 1.0


class TestSynthNmfSource:
    def test_rank_one_source_is_rank_one_fittable(self):
        spec = ToySourceSpec(rank=1, duration=4.0, i_bins=257, seed=5)
        src = synth_nmf_source(spec)
        power = np.abs(stft(src, synthesis_plan(spec)).data[:, :, 0]) ** 2
        model = init_nmf_model(power, K=1, seed=5)
        for _ in range(200):
            nmf_is_update(model, power)
        d1 = is_divergence(power, model.reconstruction())
        d0 = is_divergence(power, np.full_like(power, power.mean()))
        assert d1 <= 0.05 * d0

    def test_disjoint_sources_uncorrelated(self):
        a, b = nmf_source_pair(2, 8, duration=4.0, i_bins=257, seed=7)
        plan = hamming_plan(512, 128)
        pa = np.abs(stft(a, plan).data[:, :, 0]) ** 2
        pb = np.abs(stft(b, plan).data[:, :, 0]) ** 2
        corr = np.corrcoef(pa.ravel(), pb.ravel())[0, 1]
        assert abs(corr) <= 0.2

    def test_seed_determinism(self):
        spec = ToySourceSpec(rank=3, duration=2.0, i_bins=257, seed=9)
        assert np.array_equal(synth_nmf_source(spec).samples, synth_nmf_source(spec).samples)

    def test_expected_length_and_level(self):
        src = synth_nmf_source(ToySourceSpec(rank=2, duration=3.0, seed=1))
        assert src.num_samples == 3 * RATE
        assert np.max(np.abs(src.samples)) == pytest.approx(0.7, rel=1e-12)
