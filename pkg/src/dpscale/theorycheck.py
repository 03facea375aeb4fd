"""Empirical checks of the noisy-GD divergence bound and the softmax
Lipschitz constant.

On an alpha-strongly-convex, beta-smooth quadratic, the expected distance
between noisy and clean GD iterates after T steps is bounded by
rho * eta * (1 - c^T) / (1 - c) with c = max(|1 - eta*alpha|,
|1 - eta*beta|) and rho = sqrt(d) * sigma.  Quadratics are kept diagonal:
the Gaussian noise is rotation invariant, so general PSD forms add
nothing, and diagonal form gives closed-form clean trajectories.

The Hessian probe checks that the second derivative of the single-layer
softmax cross-entropy gradient, entries of the form x_j * p(1-p) * x_l
with x in [0,1]^d, never exceeds 1/4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class QuadraticProblem:
    """Diagonal quadratic f(w) = 0.5 * sum_j lam_j (w_j - w*_j)^2."""

    eigenvalues: np.ndarray
    w_star: np.ndarray

    def __post_init__(self) -> None:
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        self.w_star = np.asarray(self.w_star, dtype=np.float64)
        if self.eigenvalues.ndim != 1 or self.eigenvalues.shape != self.w_star.shape:
            raise ValueError("eigenvalues and w_star must be equal-length vectors")
        if not np.all(self.eigenvalues > 0):
            raise ValueError("all eigenvalues must be positive")

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def alpha(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def beta(self) -> float:
        return float(self.eigenvalues.max())

    def grad(self, w: np.ndarray) -> np.ndarray:
        return self.eigenvalues * (w - self.w_star)

    def loss(self, w: np.ndarray) -> float:
        return float(0.5 * np.sum(self.eigenvalues * (w - self.w_star) ** 2))


@dataclass
class RadiusReport:
    empirical_mean_distance: float
    bound: float
    c: float
    noise_norm_rho: float
    eta: float
    sigma: float
    T: int
    trials: int
    seed: int
    distances: np.ndarray

    @property
    def standard_error(self) -> float:
        if self.trials < 2:
            return 0.0
        return float(self.distances.std(ddof=1) / math.sqrt(self.trials))

    def to_record(self) -> dict:
        return {
            "empirical_mean_distance": self.empirical_mean_distance,
            "bound": self.bound,
            "c": self.c,
            "noise_norm_rho": self.noise_norm_rho,
            "eta": self.eta,
            "sigma": self.sigma,
            "steps": self.T,
            "trials": self.trials,
            "seed": self.seed,
            "standard_error": self.standard_error,
        }


def contraction_factor(alpha: float, beta: float, eta: float) -> float:
    """Per-step shrink rate of GD on an alpha-convex, beta-smooth function."""
    if not (0 < alpha <= beta):
        raise ValueError(f"need 0 < alpha <= beta, got alpha={alpha}, beta={beta}")
    if not (0 < eta < 2.0 / beta):
        raise ValueError(f"step size must lie in (0, {2.0 / beta}), got {eta}")
    return max(abs(1.0 - eta * alpha), abs(1.0 - eta * beta))


def radius_bound(noise_norm_rho: float, eta: float, c: float, T: int) -> float:
    """rho * eta * sum_{i<T} c^i, the expected noisy-vs-clean GD divergence cap."""
    if noise_norm_rho < 0:
        raise ValueError(f"noise_norm_rho must be nonnegative, got {noise_norm_rho}")
    if not (eta > 0):
        raise ValueError(f"eta must be positive, got {eta}")
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"c must lie in [0, 1], got {c}")
    if not (isinstance(T, int) and T >= 1):
        raise ValueError(f"T must be a positive integer, got {T}")
    if c == 0.0:
        return noise_norm_rho * eta
    if c == 1.0:
        return noise_norm_rho * eta * T
    # expm1/log1p keep the geometric sum accurate as c -> 1.
    geom = -math.expm1(T * math.log1p(c - 1.0)) / (1.0 - c)
    return noise_norm_rho * eta * geom


def radius_experiment(
    problem: QuadraticProblem,
    eta: float,
    sigma: float,
    T: int,
    trials: int,
    seed: int,
) -> RadiusReport:
    """Paired clean/noisy GD trajectories from zero; report their divergence.

    Pure noisy GD (no clipping, no momentum), update
    w <- w - eta * (grad(w) + sigma * xi).  Per-trial noise derives from
    (seed, trial index), so any parallel schedule gives identical reports.
    """
    c = contraction_factor(problem.alpha, problem.beta, eta)
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    d = problem.dim

    w_clean = np.zeros(d)
    for _ in range(T):
        w_clean = w_clean - eta * problem.grad(w_clean)

    distances = np.empty(trials)
    for trial in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, trial]))
        w = np.zeros(d)
        for _ in range(T):
            w = w - eta * (problem.grad(w) + sigma * rng.standard_normal(d))
        if not np.all(np.isfinite(w)):
            raise ValueError("noisy trajectory diverged; step size outside the contractive regime")
        distances[trial] = np.linalg.norm(w - w_clean)

    rho = math.sqrt(d) * sigma
    return RadiusReport(
        empirical_mean_distance=float(distances.mean()),
        bound=radius_bound(rho, eta, c, T),
        c=c,
        noise_norm_rho=rho,
        eta=eta,
        sigma=sigma,
        T=T,
        trials=trials,
        seed=seed,
        distances=distances,
    )


@dataclass
class LipschitzProbeReport:
    max_entry: float
    constructed_entry: float
    random_max: float
    probes: int


def _probe_batch(rng: np.random.Generator, batch: int, d: int, K: int) -> float:
    # Second-derivative entries are x_j * p_k(1-p_k) * x_l; the batch max is
    # max_k p_k(1-p_k) times the squared largest coordinate of x.
    x = rng.uniform(0.0, 1.0, size=(batch, d))
    theta = rng.normal(size=(batch, K, d))
    z = np.einsum("bkd,bd->bk", theta, x)
    z -= z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    pq = (p * (1.0 - p)).max(axis=1)
    return float((pq * x.max(axis=1) ** 2).max())


def softmax_hessian_probe(
    d: int, K: int, probes: int, seed: int = 0
) -> LipschitzProbeReport:
    """Probe the softmax-gradient second derivative for its 1/4 cap.

    Random (theta, x) probes with x in [0,1]^d, plus the constructed worst
    case: all-ones features and logits tuned so two classes each carry
    probability 1/2.
    """
    if d < 2 or K < 2:
        raise ValueError(f"need d, K >= 2, got d={d}, K={K}")
    if probes < 1:
        raise ValueError(f"probes must be at least 1, got {probes}")

    # Worst case: x_j = x_l = 1 and p = 1/2 on two classes (remaining
    # classes pushed to logit -inf in the limit; here suppressed by -1e3).
    x = np.ones(d)
    logits = np.full(K, -1e3)
    logits[0] = 0.0
    logits[1] = 0.0
    p = np.exp(logits - logits.max())
    p /= p.sum()
    constructed = float((p * (1.0 - p)).max() * x.max() ** 2)

    rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 6]))
    random_max = 0.0
    remaining = probes
    while remaining > 0:
        batch = min(remaining, 20000)
        random_max = max(random_max, _probe_batch(rng, batch, d, K))
        remaining -= batch

    return LipschitzProbeReport(
        max_entry=max(constructed, random_max),
        constructed_entry=constructed,
        random_max=random_max,
        probes=probes,
    )
