"""Independent numerical oracles shared by the unit and acceptance tests.

The GIG oracle integrates exp(gamma*u - rho*e^u - tau*e^(-u)) over
u = log(theta) with a trapezoid rule in log space; it never touches Bessel
functions, so it checks normalization and both moments independently of
the implementation under test.
"""

import math

import numpy as np
from scipy.special import logsumexp


def log_gig_integral(gamma, rho, tau, n=60001):
    """log of integral_0^inf theta^(gamma-1) exp(-rho theta - tau/theta) dtheta."""
    w_mode = (gamma + math.sqrt(gamma * gamma + 4 * rho * tau)) / (2 * rho)
    u0 = math.log(w_mode)

    def f(u):
        return gamma * u - rho * np.exp(u) - tau * np.exp(-u)

    fpeak = f(u0)
    half = 1.0
    while f(u0 - half) > fpeak - 250 or f(u0 + half) > fpeak - 250:
        half *= 1.5
    u = np.linspace(u0 - half, u0 + half, n)
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return logsumexp(f(u), b=w) + math.log(u[1] - u[0])


def oracle_gig_moments(gamma, rho, tau):
    """(log normalizer, E[theta], E[1/theta]) by quadrature."""
    l0 = log_gig_integral(gamma, rho, tau)
    mean = math.exp(log_gig_integral(gamma + 1, rho, tau) - l0)
    inv = math.exp(log_gig_integral(gamma - 1, rho, tau) - l0)
    return l0, mean, inv
