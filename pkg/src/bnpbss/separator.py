"""Full separation pipelines: AuxIVA, fixed-K ILRMA, and the adaptive VB
non-parametric model, all sharing the iterative-projection demixing core.

One iteration = source-variance updates for every stream, then a demixing
sweep rebuilding the weighted covariances from the fresh variances, then
re-extraction of the separated spectra.  Pruning of unreliable VB bases
starts after a burn-in.  Projection back onto the reference channel
happens once, after the final iteration.
"""

import time
from dataclasses import dataclass

import numpy as np

from .core import DemixingStack, Diagnostics, MultichannelSignal, SeparationConfig, Spectrogram
from .demixing import cost, demix_data, ip_update_all_bins, project_back, weighted_covariances_all
from .source_model import (
    active_count,
    compute_cm,
    expected_variance,
    init_nmf_model,
    init_vb_model,
    nmf_is_update,
    prune_bases,
    update_t,
    update_v,
    update_z,
)
from .stft import istft, plan_from_ms, stft

SILENT_FRAME_REL = 1e-10
VARIANCE_FLOOR_REL = 1e-12


@dataclass(frozen=True)
class SeparationResult:
    """Separated streams (projection-backed, mixture-length), the demixing
    stack, per-source model state, and per-iteration diagnostics."""

    sources: MultichannelSignal
    demixing: DemixingStack
    models: tuple
    diagnostics: Diagnostics


def cost_trace(result: SeparationResult) -> np.ndarray:
    return result.diagnostics.cost_trace


def _floored(r):
    return np.maximum(r, VARIANCE_FLOOR_REL * max(float(r.mean()), 1e-300))


def _spherical_variance(power_m):
    """Frame-wise average power broadcast over bins (time-varying Gauss IVA)."""
    frame_var = power_m.mean(axis=0)
    return np.broadcast_to(frame_var[None, :], power_m.shape)


def separate(mixture: MultichannelSignal, config: SeparationConfig) -> SeparationResult:
    """Run the configured algorithm on a determined multichannel mixture."""
    t_start = time.perf_counter()
    M = mixture.channels
    if M < 2:
        raise ValueError("determined separation requires M >= 2 channels")
    if config.ref_channel >= M:
        raise ValueError(f"ref_channel {config.ref_channel} out of range for {M} channels")

    plan = plan_from_ms(config.window_ms, config.hop_ms, mixture.sample_rate)
    X = stft(mixture, plan)
    Xd = X.data
    I, J, _ = Xd.shape

    frame_energy = np.sum(Xd.real**2 + Xd.imag**2, axis=(0, 2))
    live = frame_energy >= SILENT_FRAME_REL * frame_energy.mean()
    if not np.any(live):
        raise ValueError("mixture is silent; nothing to separate")

    seeds = np.random.SeedSequence(config.seed).generate_state(M)
    algo = config.algorithm
    models = []
    for m in range(M):
        power_m = Xd[:, :, m].real ** 2 + Xd[:, :, m].imag ** 2
        if algo == "vb_nonparametric":
            model = init_vb_model(power_m, config.K, config.a0, config.b0, config.c0,
                                  seed=int(seeds[m]))
            model.c_m = compute_cm(power_m[:, live], config.K, config.c0)
            models.append(model)
        elif algo == "ilrma":
            models.append(init_nmf_model(power_m, config.K, seed=int(seeds[m])))
        else:
            models.append(None)

    W = np.tile(np.eye(M, dtype=complex), (I, 1, 1))
    Y = Xd.copy()
    r = np.empty((I, J, M))
    trace = np.empty(config.iterations)
    active = np.full((config.iterations, M), -1, dtype=np.int64)

    for it in range(config.iterations):
        try:
            for m in range(M):
                power_m = Y[:, :, m].real ** 2 + Y[:, :, m].imag ** 2
                if algo == "vb_nonparametric":
                    model = models[m]
                    # prior rate follows the evolving separated power
                    model.c_m = compute_cm(power_m[:, live], config.K, config.c0)
                    update_t(model, power_m)
                    update_v(model, power_m)
                    update_z(model, power_m)
                    r[:, :, m] = expected_variance(model)
                elif algo == "ilrma":
                    nmf_is_update(models[m], power_m)
                    r[:, :, m] = _floored(models[m].reconstruction())
                else:
                    r[:, :, m] = _floored(_spherical_variance(power_m))

            for m in range(M):
                V = weighted_covariances_all(Xd[:, live], r[:, live, m])
                ip_update_all_bins(W, V, m)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise type(exc)(f"iteration {it + 1}: {exc}") from exc
        Y = demix_data(W, Xd)

        if algo == "vb_nonparametric" and (it + 1) > config.prune_burn_in:
            for m in range(M):
                prune_bases(models[m], config.prune_threshold)

        if algo == "auxiva":
            # concentrated cost: spherical variances recomputed from new Y
            r_report = np.empty_like(r)
            for m in range(M):
                power_m = Y[:, :, m].real ** 2 + Y[:, :, m].imag ** 2
                r_report[:, :, m] = _floored(_spherical_variance(power_m))
        else:
            r_report = r
        trace[it] = cost(W, Y, r_report)
        if algo == "vb_nonparametric":
            active[it] = [active_count(models[m]) for m in range(M)]

    img = project_back(W, Y, config.ref_channel)
    spec = Spectrogram(
        data=img,
        window_len_samples=X.window_len_samples,
        hop_samples=X.hop_samples,
        sample_rate=X.sample_rate,
    )
    sources = istft(spec, plan, mixture.num_samples)
    diagnostics = Diagnostics(
        cost_trace=trace,
        active_bases=active,
        wall_time=time.perf_counter() - t_start,
    )
    return SeparationResult(
        sources=sources,
        demixing=DemixingStack(matrices=W),
        models=tuple(models),
        diagnostics=diagnostics,
    )
