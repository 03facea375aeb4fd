"""Tests for Gaussian-DP accounting: conversion, composition, planning."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpscale import (
    DpBudget,
    GdpBudget,
    InfeasibleBudgetError,
    InsufficientBudgetError,
    calibrate_sigma,
    compose_gdp,
    dp_epsilon,
    dp_to_gdp,
    gdp_of_run,
    gdp_to_dp,
    plan_budget,
)

mpmath = pytest.importorskip("mpmath")


def oracle_delta(epsilon: float, mu: float) -> float:
    """50-digit evaluation of delta(eps) = Phi(-e/m + m/2) - e^e Phi(-e/m - m/2)."""
    with mpmath.workdps(50):
        e, m = mpmath.mpf(epsilon), mpmath.mpf(mu)
        val = mpmath.ncdf(-e / m + m / 2) - mpmath.exp(e) * mpmath.ncdf(-e / m - m / 2)
        return float(val)


class TestGdpOfRun:
    def test_identity_case(self):
        assert gdp_of_run(sigma=1.0, T=1).mu == 1.0

    def test_sqrt_t_over_sigma(self):
        assert gdp_of_run(sigma=2.0, T=4).mu == 1.0

    def test_large_sigma_small_mu(self):
        assert gdp_of_run(sigma=2561.0, T=100).mu == pytest.approx(10.0 / 2561.0, rel=1e-15)

    @pytest.mark.parametrize("sigma,T", [(0.0, 1), (-1.0, 1), (1.0, 0), (1.0, -3)])
    def test_invalid_arguments(self, sigma, T):
        with pytest.raises(ValueError):
            gdp_of_run(sigma, T)


class TestCalibrateSigma:
    def test_identity(self):
        assert calibrate_sigma(GdpBudget(1.0), T=1) == 1.0

    def test_t_100(self):
        assert calibrate_sigma(GdpBudget(1.0), T=100) == 10.0

    @pytest.mark.parametrize("sigma,T", [(0.5, 1), (3.0, 17), (2561.0, 100)])
    def test_round_trip_with_gdp_of_run(self, sigma, T):
        mu = gdp_of_run(sigma, T)
        assert calibrate_sigma(mu, T) == pytest.approx(sigma, rel=1e-15)


class TestComposeGdp:
    def test_singleton(self):
        assert compose_gdp([GdpBudget(1.0)]).mu == 1.0

    def test_two_equal(self):
        assert compose_gdp([GdpBudget(1.0)] * 2).mu == pytest.approx(math.sqrt(2), rel=1e-15)

    def test_three_equal(self):
        mu = 0.37
        assert compose_gdp([GdpBudget(mu)] * 3).mu == pytest.approx(mu * math.sqrt(3), rel=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compose_gdp([])

    @given(st.lists(st.floats(1e-3, 10.0), min_size=1, max_size=20))
    def test_matches_root_sum_square(self, mus):
        budgets = [GdpBudget(m) for m in mus]
        expected = math.sqrt(sum(m * m for m in mus))
        assert compose_gdp(budgets).mu == pytest.approx(expected, rel=1e-12)

    @given(st.lists(st.floats(1e-3, 10.0), min_size=2, max_size=10), st.randoms())
    def test_permutation_invariant(self, mus, rng):
        budgets = [GdpBudget(m) for m in mus]
        shuffled = list(budgets)
        rng.shuffle(shuffled)
        assert compose_gdp(budgets).mu == compose_gdp(shuffled).mu


class TestGdpToDp:
    def test_eps_zero_closed_form(self):
        # At eps=0 the conversion reduces to Phi(mu/2) - Phi(-mu/2).
        assert gdp_to_dp(GdpBudget(1.0), 0.0) == pytest.approx(0.3829250, abs=1e-6)

    @pytest.mark.parametrize(
        "epsilon,mu",
        [(1.0, 0.5), (1.0, 1.0), (2.0, 0.3), (0.1, 2.0), (0.01, 10.0 / 2561.0)],
    )
    def test_against_high_precision_oracle(self, epsilon, mu):
        assert gdp_to_dp(GdpBudget(mu), epsilon) == pytest.approx(
            oracle_delta(epsilon, mu), rel=1e-10
        )

    def test_vanishing_noise_limit(self):
        assert gdp_to_dp(GdpBudget(1e-8), 1.0) == 0.0

    def test_tail_underflow_returns_zero(self):
        assert gdp_to_dp(GdpBudget(0.05), 50.0) == 0.0

    def test_monotone_decreasing_in_epsilon(self):
        deltas = [gdp_to_dp(GdpBudget(0.7), e) for e in [0.0, 0.2, 0.5, 1.0, 2.0, 4.0]]
        assert all(a > b for a, b in zip(deltas, deltas[1:]))

    def test_monotone_increasing_in_mu(self):
        deltas = [gdp_to_dp(GdpBudget(m), 0.5) for m in [0.1, 0.3, 1.0, 2.0, 5.0]]
        assert all(a < b for a, b in zip(deltas, deltas[1:]))

    def test_negative_epsilon_rejected(self):
        with pytest.raises(ValueError):
            gdp_to_dp(GdpBudget(1.0), -0.1)


class TestDpToGdp:
    @pytest.mark.parametrize("mu", [0.1, 1.0, 3.0])
    @pytest.mark.parametrize("epsilon", [0.0, 0.1, 1.0])
    def test_round_trip(self, mu, epsilon):
        delta = gdp_to_dp(GdpBudget(mu), epsilon)
        back = dp_to_gdp(DpBudget(epsilon, delta))
        assert back.mu == pytest.approx(mu, rel=1e-9)

    def test_eps_zero_inversion(self):
        # Closed form at eps=0: mu = 2 * Phi^{-1}((1 + delta) / 2).
        delta = 0.3829250
        with mpmath.workdps(50):
            expected = float(2 * mpmath.sqrt(2) * mpmath.erfinv(mpmath.mpf(delta)))
        assert dp_to_gdp(DpBudget(0.0, delta)).mu == pytest.approx(expected, rel=1e-9)
        assert dp_to_gdp(DpBudget(0.0, delta)).mu == pytest.approx(1.0, abs=1e-6)

    def test_self_consistency_standard_budget(self):
        target = DpBudget(1.0, 1e-5)
        mu = dp_to_gdp(target)
        assert gdp_to_dp(mu, 1.0) == pytest.approx(1e-5, abs=1e-12)

    def test_unreachable_delta_raises(self):
        with pytest.raises(InfeasibleBudgetError):
            dp_to_gdp(DpBudget(0.0, 1e-300))


class TestDpEpsilon:
    @pytest.mark.parametrize("mu", [0.1, 0.5, 1.0, 3.0])
    def test_inverse_of_gdp_to_dp(self, mu):
        delta = gdp_to_dp(GdpBudget(mu), 0.8)
        assert dp_epsilon(GdpBudget(mu), delta) == pytest.approx(0.8, rel=1e-9)

    def test_already_private_returns_zero(self):
        # A tiny mu satisfies (0, 1e-5)-DP outright.
        assert dp_epsilon(GdpBudget(1e-6), 1e-5) == 0.0

    def test_invalid_delta(self):
        with pytest.raises(ValueError):
            dp_epsilon(GdpBudget(1.0), 0.0)


class TestPlanBudget:
    def test_reference_split(self):
        plan = plan_budget(DpBudget(1.0, 1e-5), 0.1, 0.2, 3)
        assert 0.86 <= plan.eps_f <= 0.90

    def test_tiny_sweeps_split(self):
        plan = plan_budget(DpBudget(1.0, 1e-5), 0.01, 0.05, 3)
        assert 0.98 <= plan.eps_f <= 1.00

    def test_sweeps_exceeding_total(self):
        with pytest.raises(InsufficientBudgetError):
            plan_budget(DpBudget(0.15, 1e-5), 0.1, 0.2, 3)

    def test_composition_never_exceeds_total(self):
        plan = plan_budget(DpBudget(1.0, 1e-5), 0.1, 0.2, 3)
        eps = dp_epsilon(plan.composed(), 1e-5)
        assert eps <= 1.0
        assert eps >= 1.0 - 1e-6

    def test_composed_matches_explicit_list(self):
        plan = plan_budget(DpBudget(2.0, 1e-6), 0.2, 0.5, 2)
        runs = [plan.mu1] * 2 + [plan.mu2] * 2 + [plan.mu_f]
        assert plan.composed().mu == pytest.approx(compose_gdp(runs).mu, rel=1e-15)

    def test_extra_sweep_stage(self):
        plan = plan_budget(DpBudget(1.0, 1e-5), 0.1, 0.2, 3, extra_eps=(0.3,))
        assert len(plan.sweep_mus) == 3
        assert plan.sweep_mus[2].mu > plan.mu2.mu
        assert dp_epsilon(plan.composed(), 1e-5) <= 1.0

    def test_invalid_ordering(self):
        with pytest.raises(ValueError):
            plan_budget(DpBudget(1.0, 1e-5), 0.2, 0.1, 3)


class TestDomainTypes:
    @pytest.mark.parametrize("mu", [0.0, -1.0, math.inf, math.nan])
    def test_gdp_validation(self, mu):
        with pytest.raises(ValueError):
            GdpBudget(mu)

    @pytest.mark.parametrize("eps,delta", [(-1.0, 1e-5), (1.0, 0.0), (1.0, 1.0), (1.0, -0.5)])
    def test_dp_validation(self, eps, delta):
        with pytest.raises(ValueError):
            DpBudget(eps, delta)


@settings(max_examples=50)
@given(
    st.floats(0.01, 10.0),
    st.floats(0.0, 2.0),
)
def test_round_trip_property(mu, epsilon):
    """dp_to_gdp inverts gdp_to_dp across the practical mu range."""
    delta = gdp_to_dp(GdpBudget(mu), epsilon)
    if not (0.0 < delta < 1.0):
        return  # underflowed or saturated; inversion undefined
    assert dp_to_gdp(DpBudget(epsilon, delta)).mu == pytest.approx(mu, rel=1e-9)
