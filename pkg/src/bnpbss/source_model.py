"""Per-source variance models.

Two models live here:

* ``VBSourceModel`` -- the adaptive-complexity model.  Source variance is
  r_ij = sum_k z_k t_ik v_kj with Gamma priors t ~ G(a0, a0), v ~ G(b0, b0)
  and a sparse reliability prior z ~ G(c0, c_m), c0 << 1.  Mean-field
  posteriors over t, v, z are GIG with shapes pinned to the prior shapes,
  so coordinate ascent reduces to closed-form updates of the GIG rate
  pairs (rho, tau) driven by E[.] and E[1/.] moments.  Bases whose
  reliability share collapses are frozen and skipped.

* ``NmfModel`` -- plain fixed-rank Itakura-Saito NMF with multiplicative
  updates, used by the fixed-K baseline.

Shapes: power and t-factor matrices are (bins I, frames J) and (I, K);
activations are (K, J); reliabilities are (K,).
"""

import numpy as np
from scipy import special

from .gig import gig_log_norm, gig_mean_and_inv

MOMENT_FLOOR = 1e-12
INV_MOMENT_CAP = 1e12
VARIANCE_FLOOR_REL = 1e-12
INIT_GAMMA_SHAPE = 1000.0  # hyperparameter init: Gamma(1000, 1000), mean 1

BETA_RULES = ("minimizer", "inverse_moment")


class NumericsError(FloatingPointError):
    """A hyperparameter update produced a non-finite value."""


def _clipped_moments(gamma, rho, tau):
    mean, inv = gig_mean_and_inv(gamma, rho, tau, on_divergent="inf")
    return np.maximum(mean, MOMENT_FLOOR), np.minimum(inv, INV_MOMENT_CAP)


class VBSourceModel:
    """Variational state for one source.

    ``beta_rule`` selects the Jensen-term tightening: "minimizer" (the
    bound-minimizing weights, default) or "inverse_moment" (weights
    proportional to the product of inverse moments).
    """

    def __init__(self, K, a0, b0, c0, c_m, rho_t, tau_t, rho_v, tau_v, rho_z, tau_z,
                 beta_rule="minimizer"):
        if beta_rule not in BETA_RULES:
            raise ValueError(f"beta_rule must be one of {BETA_RULES}")
        self.K = K
        self.a0 = float(a0)
        self.b0 = float(b0)
        self.c0 = float(c0)
        self.c_m = float(c_m)
        self.beta_rule = beta_rule
        self.rho_t = np.asarray(rho_t, dtype=np.float64)
        self.tau_t = np.asarray(tau_t, dtype=np.float64)
        self.rho_v = np.asarray(rho_v, dtype=np.float64)
        self.tau_v = np.asarray(tau_v, dtype=np.float64)
        self.rho_z = np.asarray(rho_z, dtype=np.float64)
        self.tau_z = np.asarray(tau_z, dtype=np.float64)
        if self.rho_t.shape != self.tau_t.shape or self.rho_t.shape[1] != K:
            raise ValueError("rho_t/tau_t must be (I, K)")
        if self.rho_v.shape != self.tau_v.shape or self.rho_v.shape[0] != K:
            raise ValueError("rho_v/tau_v must be (K, J)")
        if self.rho_z.shape != (K,) or self.tau_z.shape != (K,):
            raise ValueError("rho_z/tau_z must be (K,)")
        for name in ("a0", "b0", "c0", "c_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        self.active = np.ones(K, dtype=bool)
        self.refresh_moments()

    @property
    def bins(self):
        return self.rho_t.shape[0]

    @property
    def frames(self):
        return self.rho_v.shape[1]

    def refresh_moments(self, factors=("t", "v", "z")):
        """Recompute cached GIG moments from the hyperparameters."""
        if "t" in factors:
            self.Et, self.Et_inv = _clipped_moments(self.a0, self.rho_t, self.tau_t)
        if "v" in factors:
            self.Ev, self.Ev_inv = _clipped_moments(self.b0, self.rho_v, self.tau_v)
        if "z" in factors:
            self.Ez, self.Ez_inv = _clipped_moments(self.c0, self.rho_z, self.tau_z)
        return self


class BoundAuxiliaries:
    """Tightening constants: alpha (I, J) and beta (I, J, K), beta summing
    to one over the active bases for every (i, j)."""

    def __init__(self, alpha, beta):
        self.alpha = np.asarray(alpha, dtype=np.float64)
        self.beta = np.asarray(beta, dtype=np.float64)


def compute_cm(power, K, c0):
    """Prior rate matching expected model variance to the mean observed power."""
    power = np.asarray(power, dtype=np.float64)
    mean_power = power.mean()
    if not (mean_power > 0.0):
        raise ValueError("mean power must be positive to calibrate the reliability prior")
    return c0 * K / mean_power


def init_vb_model(power, K, a0, b0, c0, seed, beta_rule="minimizer"):
    """Fresh model for one source's power spectrogram.

    Every rho/tau entry is an independent Gamma(1000, 1000) draw (mean 1,
    std ~0.03) from the seeded generator, in the fixed order rho_t, tau_t,
    rho_v, tau_v, rho_z, tau_z, so equal seeds give bit-identical models.
    """
    power = np.asarray(power, dtype=np.float64)
    if power.ndim != 2:
        raise ValueError("power must be (bins, frames)")
    if np.any(power < 0):
        raise ValueError("power must be nonnegative")
    c_m = compute_cm(power, K, c0)  # raises on all-zero power
    I, J = power.shape
    rng = np.random.default_rng(seed)
    shape, scale = INIT_GAMMA_SHAPE, 1.0 / INIT_GAMMA_SHAPE
    return VBSourceModel(
        K=K, a0=a0, b0=b0, c0=c0, c_m=c_m,
        rho_t=rng.gamma(shape, scale, (I, K)),
        tau_t=rng.gamma(shape, scale, (I, K)),
        rho_v=rng.gamma(shape, scale, (K, J)),
        tau_v=rng.gamma(shape, scale, (K, J)),
        rho_z=rng.gamma(shape, scale, K),
        tau_z=rng.gamma(shape, scale, K),
        beta_rule=beta_rule,
    )


def _factored_weights(model):
    """P (I, K_act), Q (K_act, J) with beta_ijk = P_ik Q_kj / (P@Q)_ij."""
    act = model.active
    if model.beta_rule == "minimizer":
        P = 1.0 / (model.Et_inv[:, act] * model.Ez_inv[act][None, :])
        Q = 1.0 / model.Ev_inv[act]
    else:
        P = model.Et_inv[:, act] * model.Ez_inv[act][None, :]
        Q = model.Ev_inv[act]
    return P, Q


def compute_auxiliaries(model):
    """Dense tightening constants for the current moments."""
    act = model.active
    alpha = (model.Ez[act][None, :] * model.Et[:, act]) @ model.Ev[act]
    P, Q = _factored_weights(model)
    w = P[:, None, :] * Q.T[None, :, :]  # (I, J, K_act)
    beta_act = w / w.sum(axis=2, keepdims=True)
    beta = np.zeros((model.bins, model.frames, model.K))
    beta[:, :, act] = beta_act
    return BoundAuxiliaries(alpha=alpha, beta=beta)


def _check_finite(name, *arrays):
    for arr in arrays:
        bad = ~np.isfinite(arr)
        if np.any(bad):
            idx = tuple(int(v) for v in np.argwhere(bad)[0])
            raise NumericsError(f"non-finite {name} update at index {idx}")


def update_t(model, power, aux=None):
    """Coordinate update of the basis factor's (rho, tau); refreshes Et, Et_inv."""
    act = model.active
    alpha = aux.alpha if aux is not None else (
        (model.Ez[act][None, :] * model.Et[:, act]) @ model.Ev[act]
    )
    rho = model.a0 + model.Ez[act][None, :] * ((1.0 / alpha) @ model.Ev[act].T)
    if aux is not None:
        b2 = aux.beta[:, :, act] ** 2
        tau = np.einsum("ij,ijk,kj->ik", power, b2, model.Ev_inv[act]) * model.Ez_inv[act][None, :]
    else:
        P, Q = _factored_weights(model)
        S = P @ Q
        tau = (P * P) * ((power / (S * S)) @ (Q * Q * model.Ev_inv[act]).T) * model.Ez_inv[act][None, :]
    _check_finite("rho_t/tau_t", rho, tau)
    model.rho_t[:, act] = rho
    model.tau_t[:, act] = tau
    model.Et[:, act], model.Et_inv[:, act] = _clipped_moments(model.a0, rho, tau)
    return model


def update_v(model, power, aux=None):
    """Coordinate update of the activation factor; mirror of update_t."""
    act = model.active
    alpha = aux.alpha if aux is not None else (
        (model.Ez[act][None, :] * model.Et[:, act]) @ model.Ev[act]
    )
    rho = model.b0 + model.Ez[act][:, None] * (model.Et[:, act].T @ (1.0 / alpha))
    if aux is not None:
        b2 = aux.beta[:, :, act] ** 2
        tau = np.einsum("ij,ijk,ik->kj", power, b2, model.Et_inv[:, act]) * model.Ez_inv[act][:, None]
    else:
        P, Q = _factored_weights(model)
        S = P @ Q
        tau = (Q * Q) * ((P * P * model.Et_inv[:, act]).T @ (power / (S * S))) * model.Ez_inv[act][:, None]
    _check_finite("rho_v/tau_v", rho, tau)
    model.rho_v[act] = rho
    model.tau_v[act] = tau
    model.Ev[act], model.Ev_inv[act] = _clipped_moments(model.b0, rho, tau)
    return model


def update_z(model, power, aux=None):
    """Coordinate update of the reliability factor; refreshes Ez, Ez_inv."""
    act = model.active
    alpha = aux.alpha if aux is not None else (
        (model.Ez[act][None, :] * model.Et[:, act]) @ model.Ev[act]
    )
    rho = model.c_m + (model.Et[:, act] * ((1.0 / alpha) @ model.Ev[act].T)).sum(axis=0)
    if aux is not None:
        b2 = aux.beta[:, :, act] ** 2
        tau = np.einsum("ij,ijk,ik,kj->k", power, b2, model.Et_inv[:, act], model.Ev_inv[act])
    else:
        P, Q = _factored_weights(model)
        S = P @ Q
        D = P * P * model.Et_inv[:, act]
        E = Q * Q * model.Ev_inv[act]
        tau = (D * ((power / (S * S)) @ E.T)).sum(axis=0)
    _check_finite("rho_z/tau_z", rho, tau)
    model.rho_z[act] = rho
    model.tau_z[act] = tau
    model.Ez[act], model.Ez_inv[act] = _clipped_moments(model.c0, rho, tau)
    return model


def expected_variance(model):
    """E[r] = sum over active k of Ez Et Ev, floored at 1e-12 of its mean."""
    act = model.active
    r = (model.Ez[act][None, :] * model.Et[:, act]) @ model.Ev[act]
    return np.maximum(r, VARIANCE_FLOOR_REL * r.mean())


def prune_bases(model, threshold):
    """Freeze bases whose reliability share drops below ``threshold``.

    Never removes the last active basis; frozen bases keep their
    hyperparameters and are excluded from every subsequent sum.
    """
    if not (0.0 <= threshold < 1.0):
        raise ValueError("threshold must lie in [0, 1)")
    act = model.active
    shares = model.Ez[act] / model.Ez[act].sum()
    keep = shares >= threshold
    if not np.any(keep):
        keep[np.argmax(shares)] = True
    new_active = act.copy()
    new_active[np.flatnonzero(act)[~keep]] = False
    model.active = new_active
    return model


def active_count(model):
    return int(np.count_nonzero(model.active))


def variational_bound(model, power):
    """Upper bound on the source's data cost plus KL to the priors.

    Data term uses freshly tightened alpha/beta (their minimizing values),
    so the returned value is the tightened envelope; each of update_t/v/z
    cannot increase it when beta_rule is "minimizer".  Frozen bases are
    excluded throughout.
    """
    act = model.active
    alpha = (model.Ez[act][None, :] * model.Et[:, act]) @ model.Ev[act]
    P, Q = _factored_weights(model)
    S = P @ Q
    if model.beta_rule == "minimizer":
        jensen = power / S  # sum_k beta^2 E[1/(z t v)] collapses to 1/S
    else:
        inv_prod = model.Et_inv[:, act] * model.Ez_inv[act][None, :]  # == P here
        num = (P * P * inv_prod) @ (Q * Q * model.Ev_inv[act])
        jensen = power * num / (S * S)
    data = np.sum(np.log(alpha)) + np.sum(jensen)

    def kl_term(shape, prior_rate, rho, tau, mean, inv):
        logz = gig_log_norm(shape, rho, tau)
        return np.sum(
            (shape - rho) * mean - tau * inv - logz
        ) + mean.size * (special.gammaln(shape) - shape * np.log(prior_rate))

    kl = kl_term(model.a0, model.a0, model.rho_t[:, act], model.tau_t[:, act],
                 model.Et[:, act], model.Et_inv[:, act])
    kl += kl_term(model.b0, model.b0, model.rho_v[act], model.tau_v[act],
                  model.Ev[act], model.Ev_inv[act])
    kl += kl_term(model.c0, model.c_m, model.rho_z[act], model.tau_z[act],
                  model.Ez[act], model.Ez_inv[act])
    return data + kl


# ---------------------------------------------------------------------------
# fixed-rank Itakura-Saito NMF baseline
# ---------------------------------------------------------------------------

NMF_FLOOR = 1e-12


class NmfModel:
    """Strictly positive basis (I, K) and activation (K, J) matrices."""

    def __init__(self, T, V):
        self.T = np.asarray(T, dtype=np.float64)
        self.V = np.asarray(V, dtype=np.float64)
        if np.any(self.T <= 0) or np.any(self.V <= 0):
            raise ValueError("NMF factors must be strictly positive")

    def reconstruction(self):
        return self.T @ self.V


def init_nmf_model(power, K, seed):
    """Random positive factors scaled so T @ V matches the data mean."""
    power = np.asarray(power, dtype=np.float64)
    I, J = power.shape
    rng = np.random.default_rng(seed)
    T = rng.uniform(0.1, 1.1, (I, K))
    V = rng.uniform(0.1, 1.1, (K, J))
    scale = power.mean() / max((T @ V).mean(), NMF_FLOOR)
    s = np.sqrt(max(scale, NMF_FLOOR))
    return NmfModel(T=T * s, V=V * s)


def is_divergence(power, model_power):
    """Itakura-Saito divergence sum(p/q - log(p/q) - 1)."""
    p = np.maximum(np.asarray(power, dtype=np.float64), 1e-300)
    q = np.maximum(np.asarray(model_power, dtype=np.float64), 1e-300)
    ratio = p / q
    return float(np.sum(ratio - np.log(ratio) - 1.0))


def nmf_is_update(nmf, power):
    """One multiplicative-update sweep (T then V) for power ~ T @ V.

    The square-root exponent makes the Itakura-Saito divergence
    non-increasing; entries are floored to stay strictly positive.
    """
    power = np.asarray(power, dtype=np.float64)
    R = np.maximum(nmf.T @ nmf.V, NMF_FLOOR)
    ratio = (power / (R * R)) @ nmf.V.T
    denom = (1.0 / R) @ nmf.V.T
    nmf.T *= np.sqrt(ratio / np.maximum(denom, NMF_FLOOR))
    np.clip(nmf.T, NMF_FLOOR, None, out=nmf.T)
    R = np.maximum(nmf.T @ nmf.V, NMF_FLOOR)
    ratio = nmf.T.T @ (power / (R * R))
    denom = nmf.T.T @ (1.0 / R)
    nmf.V *= np.sqrt(ratio / np.maximum(denom, NMF_FLOOR))
    np.clip(nmf.V, NMF_FLOOR, None, out=nmf.V)
    return nmf
