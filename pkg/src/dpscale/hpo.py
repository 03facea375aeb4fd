"""Adaptive hyperparameter optimization of the total step size r = eta * T.

The search collapses the (eta, T) grid into the single scalar r.  Cheap
sweeps at small privacy budgets estimate the best r at each budget, a
low-degree polynomial is fit through the (mu, best r) points, and the fit
is extrapolated to the final-run budget.  Random search and a non-private
grid-search oracle provide the comparison baselines, scored by the
relative error-rate reduction (RERR).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from dpscale.accounting import DpBudget, GdpBudget, HpoBudgetPlan, calibrate_sigma, dp_to_gdp
from dpscale.optimizer import (
    Dataset,
    DivergedError,
    ModelWeights,
    RunResult,
    TrainConfig,
    dp_gd_train,
    evaluate,
)

DECOMPOSE_PRODUCT_TOL = 0.10
DECOMPOSE_MAX_REJECTS = 1000

TrainFn = Callable[[Dataset, TrainConfig, Dataset | None], RunResult]


class SweepFailedError(RuntimeError):
    """Every trial in a sweep diverged."""

    def __init__(self, trials: list["SweepTrial"]):
        super().__init__(f"all {len(trials)} sweep trials diverged")
        self.trials = trials


class UndefinedMetricError(ValueError):
    """RERR is undefined when the oracle does not beat random search."""


@dataclass(frozen=True)
class SearchSpace:
    """Bounds on eta and T; the r domain is their product range."""

    eta_min: float
    eta_max: float
    T_min: int
    T_max: int

    def __post_init__(self) -> None:
        if not (0 < self.eta_min < self.eta_max):
            raise ValueError(f"need 0 < eta_min < eta_max, got [{self.eta_min}, {self.eta_max}]")
        if not (1 <= self.T_min <= self.T_max):
            raise ValueError(f"need 1 <= T_min <= T_max, got [{self.T_min}, {self.T_max}]")
        if not self.r_min < self.r_max:
            raise ValueError("degenerate search space: r_min must be below r_max")

    @property
    def r_min(self) -> float:
        return self.eta_min * self.T_min

    @property
    def r_max(self) -> float:
        return self.eta_max * self.T_max

    def clamp_r(self, r: float) -> float:
        return min(max(r, self.r_min), self.r_max)


@dataclass
class SweepTrial:
    r: float
    eta: float
    T: int
    score: float  # training accuracy; -inf for diverged trials
    diverged: bool = False


@dataclass
class SweepResult:
    best_r: float
    trials: list[SweepTrial]
    mu: GdpBudget


@dataclass
class ScalingFit:
    """Polynomial r(mu) in ascending powers, fit through sweep outcomes."""

    degree: int
    coefficients: np.ndarray

    def __call__(self, mu: float) -> float:
        return float(np.polynomial.polynomial.polyval(mu, self.coefficients))


@dataclass
class HpoReport:
    plan: HpoBudgetPlan
    sweeps: list[SweepResult]
    fit: ScalingFit
    r_star: float
    r_star_clamped: bool
    final: RunResult
    spent_mu: float
    warnings: list[str] = field(default_factory=list)


@dataclass
class GridSearchOutcome:
    """Oracle result; the selection over trials is not privacy-accounted."""

    best: RunResult
    trials: list[tuple[float, float]]  # (r, test accuracy)
    non_private_selection: bool = True


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *tags]))


def _derived_seed(seed: int, *tags: int) -> int:
    return int(_rng(seed, *tags).integers(0, 2**63 - 1))


def sample_r(space: SearchSpace, rng: np.random.Generator) -> float:
    """Draw r log-uniformly from [r_min, r_max]."""
    lo, hi = math.log(space.r_min), math.log(space.r_max)
    return float(math.exp(rng.uniform(lo, hi)))


def decompose_r(
    space: SearchSpace, r: float, rng: np.random.Generator
) -> tuple[float, int]:
    """Split r into (eta, T) within the space bounds, product within 10% of r.

    Rejection-samples eta and T from their (log-uniform) marginals; after
    1000 rejects falls back to T = ceil(r / eta_max) clamped to bounds and
    eta = r / T clamped to bounds.
    """
    if not (space.r_min <= r <= space.r_max):
        raise ValueError(f"r={r} outside the feasible product range [{space.r_min}, {space.r_max}]")
    if r == space.r_max:
        return space.eta_max, space.T_max
    if r == space.r_min:
        return space.eta_min, space.T_min
    log_eta = (math.log(space.eta_min), math.log(space.eta_max))
    log_T = (math.log(space.T_min), math.log(space.T_max))
    for _ in range(DECOMPOSE_MAX_REJECTS):
        eta = math.exp(rng.uniform(*log_eta))
        T = int(round(math.exp(rng.uniform(*log_T))))
        T = min(max(T, space.T_min), space.T_max)
        if abs(eta * T - r) <= DECOMPOSE_PRODUCT_TOL * r:
            return eta, T
    T = min(max(math.ceil(r / space.eta_max), space.T_min), space.T_max)
    eta = min(max(r / T, space.eta_min), space.eta_max)
    return eta, T


def sweep(
    data: Dataset,
    mu: GdpBudget,
    n: int,
    space: SearchSpace,
    seed: int,
    train_fn: TrainFn = dp_gd_train,
    workers: int = 1,
) -> SweepResult:
    """Run n low-budget trials at mu and keep the r of the best one.

    Trials are selected on training-set accuracy; diverged trials score
    -inf.  Per-trial seeds derive from (seed, trial index), so any worker
    count produces the same result.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")

    def run_trial(i: int) -> SweepTrial:
        rng = _rng(seed, 0, i)
        r = sample_r(space, rng)
        eta, T = decompose_r(space, r, rng)
        sigma = calibrate_sigma(mu, T)
        config = TrainConfig(eta=eta, T=T, sigma=sigma, seed=_derived_seed(seed, 0, i, 1))
        try:
            result = train_fn(data, config, None)
        except DivergedError:
            return SweepTrial(r=r, eta=eta, T=T, score=float("-inf"), diverged=True)
        return SweepTrial(r=r, eta=eta, T=T, score=result.train_accuracy)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(run_trial, range(n)))
    else:
        trials = [run_trial(i) for i in range(n)]

    if all(t.diverged for t in trials):
        raise SweepFailedError(trials)
    best = max(range(n), key=lambda i: (trials[i].score, -i))
    return SweepResult(best_r=trials[best].r, trials=trials, mu=mu)


def fit_scaling(points: Sequence[tuple[float, float]], degree: int) -> ScalingFit:
    """Fit a degree-N polynomial r(mu) through (mu, r) points.

    degree+1 points interpolate exactly; more points fall back to least
    squares.
    """
    if degree < 0:
        raise ValueError(f"degree must be nonnegative, got {degree}")
    if len(points) < degree + 1:
        raise ValueError(f"need at least {degree + 1} points for degree {degree}, got {len(points)}")
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    if len(np.unique(xs)) != len(xs):
        raise ValueError("duplicate abscissas in scaling fit")
    if len(points) == degree + 1:
        coeffs = np.linalg.solve(np.vander(xs, degree + 1, increasing=True), ys)
    else:
        coeffs = np.polynomial.polynomial.polyfit(xs, ys, degree)
    return ScalingFit(degree=degree, coefficients=coeffs)


SweepFn = Callable[[Dataset, GdpBudget, int, SearchSpace, int], SweepResult]


def run_adaptive_hpo(
    data: Dataset,
    test: Dataset | None,
    plan: HpoBudgetPlan,
    space: SearchSpace,
    seed: int,
    degree: int = 1,
    train_fn: TrainFn = dp_gd_train,
    sweep_fn: SweepFn | None = None,
    workers: int = 1,
) -> HpoReport:
    """Sweep at each low budget, fit r(mu), extrapolate to mu_f, train once.

    The fit needs degree+1 sweep stages, so the plan must carry that many
    sweep budgets.  Total privacy consumption equals the plan's composed
    total.
    """
    if degree + 1 > len(plan.sweep_mus):
        raise ValueError(
            f"degree {degree} needs {degree + 1} sweep stages but the plan has {len(plan.sweep_mus)}"
        )
    warnings: list[str] = []
    sweeps: list[SweepResult] = []
    for stage, mu in enumerate(plan.sweep_mus):
        stage_seed = _derived_seed(seed, 1, stage)
        if sweep_fn is not None:
            result = sweep_fn(data, mu, plan.n, space, stage_seed)
        else:
            result = sweep(data, mu, plan.n, space, stage_seed, train_fn=train_fn, workers=workers)
        sweeps.append(result)

    fit = fit_scaling([(s.mu.mu, s.best_r) for s in sweeps], degree)
    r_raw = fit(plan.mu_f.mu)
    r_star = space.clamp_r(r_raw)
    clamped = r_star != r_raw
    if clamped:
        warnings.append(
            f"extrapolated r={r_raw:.6g} outside [{space.r_min:.6g}, {space.r_max:.6g}]; clamped"
        )

    rng = _rng(seed, 3)
    eta, T = decompose_r(space, r_star, rng)
    sigma = calibrate_sigma(plan.mu_f, T)
    config = TrainConfig(eta=eta, T=T, sigma=sigma, seed=_derived_seed(seed, 2))
    final = train_fn(data, config, test)
    return HpoReport(
        plan=plan,
        sweeps=sweeps,
        fit=fit,
        r_star=r_star,
        r_star_clamped=clamped,
        final=final,
        spent_mu=plan.composed().mu,
        warnings=warnings,
    )


def _full_budget_run(
    data: Dataset,
    test: Dataset | None,
    mu: GdpBudget,
    space: SearchSpace,
    r: float,
    rng: np.random.Generator,
    run_seed: int,
    train_fn: TrainFn,
) -> RunResult:
    eta, T = decompose_r(space, r, rng)
    sigma = calibrate_sigma(mu, T)
    config = TrainConfig(eta=eta, T=T, sigma=sigma, seed=run_seed)
    try:
        return train_fn(data, config, test)
    except DivergedError:
        # A diverged run still spent its budget; report the zero model.
        weights = ModelWeights.zeros(data.n_classes, data.dim)
        train_acc, train_loss = evaluate(weights, data)
        test_acc = evaluate(weights, test)[0] if test is not None else None
        return RunResult(
            weights=weights,
            train_accuracy=train_acc,
            train_loss=train_loss,
            test_accuracy=test_acc,
            per_step_log=[],
            config=config,
            mu=mu.mu,
        )


def random_search(
    data: Dataset,
    test: Dataset | None,
    total: DpBudget,
    space: SearchSpace,
    seed: int,
    train_fn: TrainFn = dp_gd_train,
) -> RunResult:
    """One draw of r and a single run spending the entire budget."""
    mu = dp_to_gdp(total)
    rng = _rng(seed, 4)
    r = sample_r(space, rng)
    return _full_budget_run(data, test, mu, space, r, rng, _derived_seed(seed, 4, 1), train_fn)


def grid_search(
    data: Dataset,
    test: Dataset,
    total: DpBudget,
    grid: Sequence[float],
    space: SearchSpace,
    seed: int,
    train_fn: TrainFn = dp_gd_train,
    workers: int = 1,
) -> GridSearchOutcome:
    """Oracle baseline: a full-budget run per grid point, best TEST accuracy.

    Selection over trials is deliberately not charged to privacy; the
    outcome is labeled as non-private selection.
    """
    if len(grid) == 0:
        raise ValueError("grid must contain at least one r value")
    mu = dp_to_gdp(total)

    def run_point(item: tuple[int, float]) -> RunResult:
        i, r = item
        rng = _rng(seed, 5, i)
        return _full_budget_run(data, test, mu, space, r, rng, _derived_seed(seed, 5, i, 1), train_fn)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_point, enumerate(grid)))
    else:
        results = [run_point(item) for item in enumerate(grid)]

    best = max(range(len(grid)), key=lambda i: (results[i].test_accuracy, -i))
    trials = [(float(r), float(res.test_accuracy)) for r, res in zip(grid, results)]
    return GridSearchOutcome(best=results[best], trials=trials)


def default_grid(space: SearchSpace, points: int = 10) -> list[float]:
    """Log-spaced r grid across the search space."""
    return list(np.geomspace(space.r_min, space.r_max, points))


def rerr(ours: float, random: float, oracle: float) -> float:
    """Relative error-rate reduction: 100 * (ours - random) / (oracle - random)."""
    if oracle <= random:
        raise UndefinedMetricError(
            f"RERR undefined: oracle ({oracle}) does not beat random search ({random})"
        )
    return 100.0 * (ours - random) / (oracle - random)
