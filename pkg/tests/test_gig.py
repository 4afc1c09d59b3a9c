"""GIG moment machinery against closed forms and an independent quadrature oracle.

The oracle integrates exp(gamma*u - rho*e^u - tau*e^(-u)) over u = log(theta)
with a trapezoid rule in log space; it never touches Bessel functions, so it
checks normalization and both moments independently of the implementation.
"""

import math

import numpy as np
import pytest

from bnpbss.gig import (
    DivergentMomentError,
    GigMoments,
    GigParams,
    gig_log_norm,
    gig_mean_and_inv,
    gig_moments,
    log_bessel_k,
)
from oracles import oracle_gig_moments as oracle_moments

ORACLE_GRID_GAMMA = [-2.0, -0.5, 0.1, 0.5, 1.0, 5.0]
ORACLE_GRID_RATE = [1e-3, 1.0, 1e3]


class TestLogBesselK:
    def test_half_order_closed_form(self):
        # K_{1/2}(x) = sqrt(pi/(2x)) e^{-x}; at x=2 the log is log(sqrt(pi/4)) - 2
        expected = 0.5 * math.log(math.pi / 4.0) - 2.0
        assert log_bessel_k(0.5, 2.0) == pytest.approx(expected, abs=1e-12)

    def test_order_symmetry(self):
        orders = np.array([0.1, 0.9, 1.5, 7.3, 24.0])
        x = np.array([1e-6, 0.3, 2.0, 50.0, 1e4])
        np.testing.assert_allclose(
            log_bessel_k(-orders, x), log_bessel_k(orders, x), rtol=0, atol=1e-13
        )

    def test_against_integral_representation(self):
        # K_5(10) = int_0^inf exp(-10 cosh t) cosh(5t) dt, 1e6-point trapezoid
        t = np.linspace(0.0, 12.0, 1_000_001)
        quad = np.trapezoid(np.exp(-10.0 * np.cosh(t)) * np.cosh(5.0 * t), t)
        assert quad == pytest.approx(5.754184998531229e-05, rel=1e-12)  # frozen oracle value
        assert math.exp(log_bessel_k(5.0, 10.0)) == pytest.approx(quad, rel=1e-10)

    def test_overflow_region_matches_series_scaling(self):
        # kve overflows near (order=50, x=1e-8); the result must still obey
        # the recurrence K_{g+1} = K_{g-1} + (2g/x) K_g in log space.
        g, x = 49.0, 1e-8
        lk_m1 = log_bessel_k(g - 1.0, x)
        lk0 = log_bessel_k(g, x)
        lk_p1 = log_bessel_k(g + 1.0, x)
        lhs = lk_p1
        rhs = np.logaddexp(lk_m1, math.log(2 * g / x) + lk0)
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_extreme_argument_range(self):
        # finite, monotone in order, across the contracted x range
        for x in (1e-8, 1e-3, 1.0, 700.0, 1e6):
            vals = log_bessel_k(np.array([0.0, 1.0, 10.0, 50.0]), x)
            assert np.all(np.isfinite(vals))
            assert np.all(np.diff(vals) > 0)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            log_bessel_k(1.0, 0.0)
        with pytest.raises(ValueError):
            log_bessel_k(1.0, -3.0)


class TestGigMoments:
    def test_half_integer_closed_form(self):
        # gamma=1/2, rho=tau=1: x=2, K_{3/2}(2) = K_{1/2}(2) * (1 + 1/2)
        m = gig_moments(GigParams(gamma=0.5, rho=1.0, tau=1.0))
        assert m.mean == pytest.approx(1.5, rel=1e-12)
        assert m.inv_mean == pytest.approx(1.0, rel=1e-12)

    def test_gamma_limit(self):
        m = gig_moments(GigParams(gamma=2.0, rho=1.0, tau=0.0))
        assert m.mean == pytest.approx(2.0, rel=1e-14)
        assert m.inv_mean == pytest.approx(1.0, rel=1e-14)

    def test_inversion_symmetry_point(self):
        # theta -> 1/theta maps GIG(g, r, t) to GIG(-g, t, r)
        _, inv = gig_mean_and_inv(0.7, 2.0, 3.0)
        mean_flipped, _ = gig_mean_and_inv(-0.7, 3.0, 2.0)
        assert inv == pytest.approx(mean_flipped, rel=1e-12)
        # frozen quadrature-oracle values for the same point
        assert gig_mean_and_inv(0.7, 2.0, 3.0)[0] == pytest.approx(1.5298876803896495, rel=1e-9)
        assert inv == pytest.approx(0.7865917869264321, rel=1e-9)

    def test_inversion_symmetry_grid(self):
        rng = np.random.default_rng(7)
        g = rng.uniform(-5, 5, 200)
        r = 10.0 ** rng.uniform(-3, 3, 200)
        t = 10.0 ** rng.uniform(-3, 3, 200)
        _, inv = gig_mean_and_inv(g, r, t)
        mean_flipped, _ = gig_mean_and_inv(-g, t, r)
        np.testing.assert_allclose(inv, mean_flipped, rtol=1e-12)

    def test_cauchy_schwarz_property(self):
        rng = np.random.default_rng(11)
        g = rng.uniform(-10, 10, 500)
        r = 10.0 ** rng.uniform(-4, 4, 500)
        t = 10.0 ** rng.uniform(-4, 4, 500)
        mean, inv = gig_mean_and_inv(g, r, t)
        assert np.all(mean * inv >= 1.0 - 1e-10)

    def test_quadrature_oracle_grid(self):
        for gamma in ORACLE_GRID_GAMMA:
            for rho in ORACLE_GRID_RATE:
                for tau in ORACLE_GRID_RATE:
                    logz_o, mean_o, inv_o = oracle_moments(gamma, rho, tau)
                    mean, inv = gig_mean_and_inv(gamma, rho, tau)
                    # log Z differs from the integral by log of nothing: the
                    # oracle integral IS the normalizer
                    assert gig_log_norm(gamma, rho, tau) == pytest.approx(logz_o, abs=1e-8)
                    assert mean == pytest.approx(mean_o, rel=1e-8)
                    assert inv == pytest.approx(inv_o, rel=1e-8)

    def test_divergent_inverse_moment(self):
        with pytest.raises(DivergentMomentError):
            gig_moments(GigParams(gamma=0.5, rho=1.0, tau=0.0))
        mean, inv = gig_mean_and_inv(0.5, 1.0, 0.0, on_divergent="inf")
        assert mean == pytest.approx(0.5)
        assert np.isinf(inv)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            GigParams(gamma=1.0, rho=-1.0, tau=1.0)
        with pytest.raises(ValueError):
            GigParams(gamma=-0.5, rho=1.0, tau=0.0)
        with pytest.raises(ValueError):
            GigMoments(mean=1.0, inv_mean=0.5)  # violates mean*inv >= 1
