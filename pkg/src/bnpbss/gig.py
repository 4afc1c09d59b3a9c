"""Generalized inverse Gaussian moments and log-scale Bessel machinery.

The density handled here is

    GIG(theta | gamma, rho, tau)
        = exp{(gamma-1) log theta - rho theta - tau/theta}
          / (2 (tau/rho)^(gamma/2) K_gamma(2 sqrt(rho tau)))

and the only moments the variational updates ever need are E[theta] and
E[1/theta], both expressible through ratios of modified Bessel functions
of the second kind.  K underflows for arguments beyond ~700 and overflows
for large orders at tiny arguments, so everything is computed from log
values, and adjacent-order ratios come from the recurrence

    K_{g+1}(x) = K_{g-1}(x) + (2 g / x) K_g(x).
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

# Below this value of 2*sqrt(rho*tau) the Bessel-ratio formulas lose all
# precision; the tau -> 0 Gamma(gamma, rho) limit is exact to first order.
GAMMA_LIMIT_X = 1e-10


class DivergentMomentError(ValueError):
    """E[1/theta] does not exist (tau ~ 0 with shape gamma <= 1)."""


def log_bessel_k(order, x):
    """log K_order(x), elementwise over broadcast arrays.

    Uses scipy's exponentially scaled ``kve`` wherever it is finite and a
    log-space ascending series where ``kve`` overflows (large order with
    tiny argument, where the opposite-order branch of the series is far
    below double precision).
    """
    v = np.abs(np.asarray(order, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("log_bessel_k requires x > 0")
    v, x = np.broadcast_arrays(v, x)

    with np.errstate(over="ignore"):
        kv = special.kve(v, x)
    out = np.empty(np.shape(kv), dtype=np.float64)
    ok = np.isfinite(kv) & (kv > 0.0)
    np.log(kv, out=out, where=ok)
    out[ok] -= x[ok]

    if not np.all(ok):
        # kve overflowed: necessarily v >> 1 and x tiny, where
        # K_v(x) = Gamma(v)/2 * (2/x)^v * [1 + sum_k (x^2/4)^k / (k! (1-v)_k)]
        # and the (x/2)^v branch is negligible (below ~1e-250 relative).
        vf = v[~ok]
        xf = x[~ok]
        q = xf * xf / 4.0
        corr = np.zeros_like(xf)
        poch = np.ones_like(xf)
        term = np.ones_like(xf)
        for k in range(1, 4):
            poch = poch * (k - vf)
            term = term * q / k
            corr += term / poch
        out[~ok] = np.log(0.5) + special.gammaln(vf) + vf * np.log(2.0 / xf) + np.log1p(corr)
    return out if out.ndim else float(out)


def _validate_params(gamma, rho, tau):
    gamma = np.asarray(gamma, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(rho <= 0.0) or not np.all(np.isfinite(rho)):
        raise ValueError("rho must be positive and finite")
    if np.any(tau < 0.0) or not np.all(np.isfinite(tau)):
        raise ValueError("tau must be nonnegative and finite")
    if np.any((tau == 0.0) & (gamma <= 0.0)):
        raise ValueError("tau = 0 requires gamma > 0 (Gamma limit)")
    return np.broadcast_arrays(gamma, rho, tau)


def gig_mean_and_inv(gamma, rho, tau, on_divergent="raise"):
    """E[theta] and E[1/theta] of GIG(gamma, rho, tau), elementwise.

    For 2 sqrt(rho tau) < GAMMA_LIMIT_X the Gamma(gamma, rho) limit is
    used: mean = gamma/rho and inv = rho/(gamma-1), the latter existing
    only for gamma > 1.  ``on_divergent`` controls the gamma <= 1 case:
    "raise" raises DivergentMomentError, "inf" returns np.inf so callers
    can apply their own cap.
    """
    if on_divergent not in ("raise", "inf"):
        raise ValueError("on_divergent must be 'raise' or 'inf'")
    g, r, t = _validate_params(gamma, rho, tau)
    x = 2.0 * np.sqrt(r * t)
    limit = x < GAMMA_LIMIT_X

    mean = np.empty(g.shape, dtype=np.float64)
    inv = np.empty(g.shape, dtype=np.float64)

    if np.any(~limit):
        gb, rb, tb, xb = g[~limit], r[~limit], t[~limit], x[~limit]
        # Work with |gamma| so the recurrence K_{a+1} = K_{a-1} + (2a/x) K_a
        # only ever adds positive terms; for gamma < 0 the two ratios swap
        # roles (K is even in its order).
        ab = np.abs(gb)
        q = np.exp(log_bessel_k(ab - 1.0, xb) - log_bessel_k(ab, xb))
        r_plus = q + 2.0 * ab / xb  # K_{a+1}/K_a
        scale = np.sqrt(tb / rb)
        neg = gb < 0.0
        mean[~limit] = np.where(neg, q, r_plus) * scale
        inv[~limit] = np.where(neg, r_plus, q) / scale

    if np.any(limit):
        gl, rl = g[limit], r[limit]
        if np.any(gl <= 0.0):
            raise ValueError("gamma must be positive when 2*sqrt(rho*tau) is below the Gamma-limit threshold")
        mean[limit] = gl / rl
        div = gl <= 1.0
        if np.any(div) and on_divergent == "raise":
            raise DivergentMomentError(
                "E[1/theta] diverges for gamma <= 1 as tau -> 0 (first offending gamma "
                f"= {float(gl[div][0]):g})"
            )
        inv_l = np.full(gl.shape, np.inf)
        np.divide(rl, gl - 1.0, out=inv_l, where=~div)
        inv[limit] = inv_l

    if mean.ndim:
        return mean, inv
    return float(mean), float(inv)


def gig_log_norm(gamma, rho, tau):
    """log of the GIG normalizing constant 2 (tau/rho)^(gamma/2) K_gamma(2 sqrt(rho tau)).

    Falls back to the Gamma-limit normalizer Gamma(gamma) rho^(-gamma)
    below the same threshold as the moments.
    """
    g, r, t = _validate_params(gamma, rho, tau)
    x = 2.0 * np.sqrt(r * t)
    limit = x < GAMMA_LIMIT_X
    out = np.empty(g.shape, dtype=np.float64)
    if np.any(~limit):
        gb, rb, tb, xb = g[~limit], r[~limit], t[~limit], x[~limit]
        out[~limit] = np.log(2.0) + 0.5 * gb * (np.log(tb) - np.log(rb)) + log_bessel_k(gb, xb)
    if np.any(limit):
        gl, rl = g[limit], r[limit]
        if np.any(gl <= 0.0):
            raise ValueError("gamma must be positive in the Gamma-limit branch")
        out[limit] = special.gammaln(gl) - gl * np.log(rl)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GigParams:
    gamma: float
    rho: float
    tau: float

    def __post_init__(self):
        _validate_params(self.gamma, self.rho, self.tau)


@dataclass(frozen=True)
class GigMoments:
    mean: float
    inv_mean: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and self.mean > 0):
            raise ValueError(f"mean must be positive and finite, got {self.mean}")
        if not (self.inv_mean > 0):
            raise ValueError(f"inv_mean must be positive, got {self.inv_mean}")
        # Cauchy-Schwarz, with slack for roundoff at extreme parameters
        if np.isfinite(self.inv_mean) and self.mean * self.inv_mean < 1.0 - 1e-9:
            raise ValueError(
                f"mean * inv_mean = {self.mean * self.inv_mean:.15g} violates the >= 1 bound"
            )


def gig_moments(p: GigParams) -> GigMoments:
    """Typed scalar wrapper around :func:`gig_mean_and_inv`."""
    mean, inv = gig_mean_and_inv(p.gamma, p.rho, p.tau, on_divergent="raise")
    return GigMoments(mean=mean, inv_mean=inv)
