"""Exact Gaussian-DP (mu-GDP) accounting for full-batch DP-GD.

A full-batch run of T Gaussian-mechanism steps with noise multiplier sigma
is sqrt(T)/sigma GDP, mechanisms compose as the root-sum-of-squares of
their mu values, and a mu-GDP guarantee converts to (epsilon, delta)-DP via
the two-term normal-CDF formula

    delta(eps) = Phi(-eps/mu + mu/2) - exp(eps) * Phi(-eps/mu - mu/2).

All accounting here is exact; no numerical privacy-loss-distribution
machinery is required for the full-batch Gaussian case.  `plan_budget`
splits a target (epsilon, delta) into low-cost sweep budgets plus a final
run budget whose composition meets the target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from scipy.special import log_ndtr

# Bisection bracket for mu when inverting the DP->GDP conversion.  Covers
# every epsilon in [0.01, 10] at practical deltas with wide margin.
MU_BRACKET = (1e-8, 100.0)
DELTA_TOL = 1e-12
MAX_BISECT_ITERS = 200


class InfeasibleBudgetError(ValueError):
    """No mu in the search bracket achieves the requested (eps, delta)."""


class InsufficientBudgetError(ValueError):
    """The sweep budgets alone exceed the total budget; no final run fits."""


def _norm_cdf(x: float) -> float:
    # erfc-based standard normal CDF; relative error <= ~1e-14 in the tails,
    # needed because deltas of interest are 1e-5 and far smaller.
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class GdpBudget:
    """A mu-GDP privacy guarantee."""

    mu: float

    def __post_init__(self) -> None:
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be positive and finite, got {self.mu}")


@dataclass(frozen=True)
class DpBudget:
    """An (epsilon, delta)-DP privacy guarantee."""

    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class HpoBudgetPlan:
    """A (mu1, mu2, mu_f, n) split whose composition meets a total budget.

    ``sweep_mus`` carries one budget per sweep stage; the first two are the
    usual mu1/mu2 of the linear fit, extra entries support higher-degree
    fits.  ``eps_f`` reports the final run's budget expressed as epsilon at
    the total's delta.
    """

    sweep_mus: tuple[GdpBudget, ...]
    mu_f: GdpBudget
    n: int
    total: DpBudget
    sweep_epsilons: tuple[float, ...] = field(default=())
    eps_f: float = 0.0

    @property
    def mu1(self) -> GdpBudget:
        return self.sweep_mus[0]

    @property
    def mu2(self) -> GdpBudget:
        return self.sweep_mus[1]

    def composed(self) -> GdpBudget:
        """Root-sum-of-squares of every run the plan will execute."""
        runs = [m for m in self.sweep_mus for _ in range(self.n)] + [self.mu_f]
        return compose_gdp(runs)


def gdp_of_run(sigma: float, T: int) -> GdpBudget:
    """GDP guarantee of T full-batch Gaussian steps at noise multiplier sigma."""
    if not (sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not (isinstance(T, int) and T >= 1):
        raise ValueError(f"T must be a positive integer, got {T}")
    return GdpBudget(math.sqrt(T) / sigma)


def calibrate_sigma(mu: GdpBudget, T: int) -> float:
    """Noise multiplier so that T full-batch steps spend exactly mu GDP."""
    if not (isinstance(T, int) and T >= 1):
        raise ValueError(f"T must be a positive integer, got {T}")
    return math.sqrt(T) / mu.mu


def compose_gdp(budgets: Sequence[GdpBudget]) -> GdpBudget:
    """Compose GDP mechanisms: the total is sqrt(sum of mu squared)."""
    if len(budgets) == 0:
        raise ValueError("cannot compose an empty list of budgets")
    return GdpBudget(math.sqrt(math.fsum(b.mu * b.mu for b in budgets)))


def gdp_to_dp(mu: GdpBudget, epsilon: float) -> float:
    """Smallest delta such that a mu-GDP mechanism is (epsilon, delta)-DP."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    m = mu.mu
    a = -epsilon / m + m / 2.0
    b = -epsilon / m - m / 2.0
    # exp(eps) * Phi(b) in log space: Phi(b) underflows long before the
    # product does.
    delta = _norm_cdf(a) - math.exp(epsilon + log_ndtr(b))
    # Cancellation can leave a tiny negative residue; delta is a probability.
    return min(max(delta, 0.0), 1.0)


def dp_to_gdp(target: DpBudget) -> GdpBudget:
    """The unique mu whose conversion at target.epsilon gives target.delta.

    delta(mu) is strictly increasing in mu at fixed epsilon, so bracketing
    bisection finds the root.  Iterates to machine precision on mu (the
    delta tolerance alone is meaningless when delta underflows toward 0).
    """
    lo, hi = MU_BRACKET
    if gdp_to_dp(GdpBudget(lo), target.epsilon) > target.delta:
        raise InfeasibleBudgetError(
            f"target {target} below the delta reachable at mu={lo}"
        )
    if gdp_to_dp(GdpBudget(hi), target.epsilon) < target.delta:
        raise InfeasibleBudgetError(
            f"target {target} above the delta reachable at mu={hi}"
        )
    for _ in range(MAX_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        d = gdp_to_dp(GdpBudget(mid), target.epsilon)
        if d < target.delta:
            lo = mid
        else:
            hi = mid
    return GdpBudget(0.5 * (lo + hi))


def dp_epsilon(mu: GdpBudget, delta: float) -> float:
    """Smallest epsilon such that a mu-GDP mechanism is (epsilon, delta)-DP.

    Returns 0 when the mechanism already satisfies (0, delta)-DP.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if gdp_to_dp(mu, 0.0) <= delta:
        return 0.0
    lo, hi = 0.0, 1.0
    while gdp_to_dp(mu, hi) > delta:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise InfeasibleBudgetError(f"no epsilon below 1e6 reaches delta={delta}")
    for _ in range(MAX_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if gdp_to_dp(mu, mid) > delta:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def plan_budget(
    total: DpBudget,
    eps1: float,
    eps2: float,
    n: int,
    extra_eps: Sequence[float] = (),
) -> HpoBudgetPlan:
    """Split a total (epsilon, delta) budget into sweep and final-run budgets.

    eps1 and eps2 (and any extras, for higher-degree fits) are converted to
    mu at the total's delta; the final-run mu_f is then solved by bisection
    so that n runs at each sweep mu plus one run at mu_f compose exactly to
    the total budget.
    """
    sweep_eps = (eps1, eps2, *extra_eps)
    if not all(e > 0 for e in sweep_eps) or not eps1 < eps2:
        raise ValueError(f"sweep epsilons must satisfy 0 < eps1 < eps2, got {sweep_eps}")
    if not (isinstance(n, int) and n >= 1):
        raise ValueError(f"n must be a positive integer, got {n}")
    if max(sweep_eps) >= total.epsilon:
        raise InsufficientBudgetError(
            f"sweep epsilon {max(sweep_eps)} is not below the total {total.epsilon}"
        )

    sweep_mus = tuple(dp_to_gdp(DpBudget(e, total.delta)) for e in sweep_eps)
    mu_total = dp_to_gdp(total)
    sweep_runs = [m for m in sweep_mus for _ in range(n)]
    spent_sq = math.fsum(m.mu * m.mu for m in sweep_runs)
    if spent_sq >= mu_total.mu**2:
        raise InsufficientBudgetError(
            f"{n} runs at each of {sweep_eps} already exceed the total budget {total}"
        )

    # Composed epsilon is strictly increasing in mu_f; bisect until the
    # re-composed, re-converted budget matches total.epsilon.
    def composed_eps(mu_f: float) -> float:
        comp = compose_gdp(sweep_runs + [GdpBudget(mu_f)])
        return dp_epsilon(comp, total.delta)

    lo = 1e-12
    hi = mu_total.mu
    for _ in range(MAX_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if composed_eps(mid) < total.epsilon:
            lo = mid
        else:
            hi = mid
    # Take the lower endpoint: the plan must never exceed the total budget.
    mu_f = GdpBudget(lo)
    eps_f = dp_epsilon(mu_f, total.delta)
    return HpoBudgetPlan(
        sweep_mus=sweep_mus,
        mu_f=mu_f,
        n=n,
        total=total,
        sweep_epsilons=sweep_eps,
        eps_f=eps_f,
    )
