"""Full-batch DP gradient descent on a linear softmax classifier.

The model is a bias-free K x d weight matrix initialized at zero.  Each
step sums per-sample l2-clipped softmax cross-entropy gradients over the
whole dataset, adds Gaussian noise to the sum, divides by the dataset
size, and takes a momentum step.  An optional extra "free" step reuses the
final momentum buffer with no new gradient and no new noise.

A noise-free twin (`gd_train`, no clipping) serves the convergence-theory
experiments.  Per-step noise derives from (seed, step index) through a
counter-based Philox generator, so trajectories are reproducible
regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIVERGENCE_LOSS_CAP = 1e12


class DivergedError(RuntimeError):
    """Training loss became non-finite or exceeded the divergence cap."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"training diverged at step {step} (loss={loss})")
        self.step = step
        self.loss = loss


@dataclass
class Dataset:
    """Fixed feature vectors with integer class labels."""

    features: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int
    n_classes: int

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"features must be a nonempty N x d matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must be a vector with one entry per sample")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError(f"label indices must lie in [0, {self.n_classes})")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one DP-GD run."""

    eta: float
    T: int
    sigma: float = 0.0
    clip_norm: float = 1.0
    momentum_rho: float = 0.9
    free_step: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.eta > 0):
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not (isinstance(self.T, int) and self.T >= 0):
            raise ValueError(f"T must be a nonnegative integer, got {self.T}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not (self.clip_norm > 0):
            raise ValueError(f"clip_norm must be positive, got {self.clip_norm}")
        if not (0.0 <= self.momentum_rho < 1.0):
            raise ValueError(f"momentum_rho must lie in [0, 1), got {self.momentum_rho}")


@dataclass
class ModelWeights:
    """Bias-free K x d linear classifier weights."""

    W: np.ndarray

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, dtype=np.float64)
        if self.W.ndim != 2:
            raise ValueError("W must be a K x d matrix")
        if not np.all(np.isfinite(self.W)):
            raise ValueError("W contains non-finite entries")

    @classmethod
    def zeros(cls, n_classes: int, dim: int) -> "ModelWeights":
        return cls(np.zeros((n_classes, dim)))


@dataclass
class RunResult:
    """Outcome of one training run."""

    weights: ModelWeights
    train_accuracy: float
    train_loss: float
    test_accuracy: float | None
    per_step_log: list[tuple[int, float, float]]  # (step, grad norm, loss)
    config: TrainConfig
    mu: float | None  # GDP spend of the run; None for noise-free runs

    def to_record(self) -> dict:
        return {
            "train_accuracy": self.train_accuracy,
            "train_loss": self.train_loss,
            "test_accuracy": self.test_accuracy,
            "eta": self.config.eta,
            "steps": self.config.T,
            "sigma": self.config.sigma,
            "momentum": self.config.momentum_rho,
            "free_step": self.config.free_step,
            "seed": self.config.seed,
            "mu": self.mu,
        }


def _check_dims(weights: ModelWeights, data: Dataset) -> None:
    if weights.W.shape != (data.n_classes, data.dim):
        raise ValueError(
            f"weights shape {weights.W.shape} does not match dataset "
            f"({data.n_classes} classes, {data.dim} features)"
        )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _residuals(weights: ModelWeights, data: Dataset) -> np.ndarray:
    """Per-sample softmax residuals p - onehot(y), shape (N, K)."""
    probs = _softmax(data.features @ weights.W.T)
    probs[np.arange(data.n_samples), data.labels] -= 1.0
    return probs


def clipped_gradient_sum(
    weights: ModelWeights, data: Dataset, clip_norm: float
) -> np.ndarray:
    """Sum of per-sample softmax cross-entropy gradients, each l2-clipped.

    The per-sample gradient is the rank-one matrix (p - onehot(y)) x^T, so
    its Frobenius norm factors as ||p - onehot(y)|| * ||x|| and clipping
    never needs the K x d matrix materialized per sample.
    """
    _check_dims(weights, data)
    if not (clip_norm > 0):
        raise ValueError(f"clip_norm must be positive, got {clip_norm}")
    resid = _residuals(weights, data)
    norms = np.linalg.norm(resid, axis=1) * np.linalg.norm(data.features, axis=1)
    scale = np.where(norms > clip_norm, clip_norm / np.maximum(norms, 1e-300), 1.0)
    return (resid * scale[:, None]).T @ data.features


def gradient_mean(weights: ModelWeights, data: Dataset) -> np.ndarray:
    """Unclipped mean gradient of the softmax cross-entropy loss."""
    _check_dims(weights, data)
    return _residuals(weights, data).T @ data.features / data.n_samples


def evaluate(weights: ModelWeights, data: Dataset) -> tuple[float, float]:
    """(accuracy, mean cross-entropy loss); argmax ties go to the lowest class."""
    _check_dims(weights, data)
    if data.n_samples == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    logits = data.features @ weights.W.T
    preds = np.argmax(logits, axis=1)  # first max wins: ties -> lowest index
    accuracy = float(np.mean(preds == data.labels))
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-np.mean(log_probs[np.arange(data.n_samples), data.labels]))
    return accuracy, loss


def _step_noise(seed: int, step: int, shape: tuple[int, int]) -> np.ndarray:
    # Counter-based Philox keyed on (seed, step): identical draws on any
    # platform or worker schedule.
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(step)], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.standard_normal(shape)


def _train(
    data: Dataset,
    config: TrainConfig,
    test: Dataset | None,
    clip: bool,
) -> RunResult:
    weights = ModelWeights.zeros(data.n_classes, data.dim)
    v = np.zeros_like(weights.W)
    log: list[tuple[int, float, float]] = []
    n = data.n_samples

    for t in range(config.T):
        if clip:
            g = clipped_gradient_sum(weights, data, config.clip_norm)
        else:
            g = _residuals(weights, data).T @ data.features
        if config.sigma > 0:
            g = g + config.sigma * _step_noise(config.seed, t, g.shape)
        grad = g / n
        v = config.momentum_rho * v + grad
        weights.W = weights.W - config.eta * v
        _, loss = evaluate(weights, data)
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS_CAP:
            raise DivergedError(t, loss)
        log.append((t, float(np.linalg.norm(grad)), loss))

    if config.free_step and config.T > 0:
        # Extra step along the final momentum buffer: no fresh gradient, no
        # fresh noise, hence no privacy cost.
        weights.W = weights.W - config.eta * v
        _, loss = evaluate(weights, data)
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS_CAP:
            raise DivergedError(config.T, loss)
        log.append((config.T, float(np.linalg.norm(v)), loss))

    train_acc, train_loss = evaluate(weights, data)
    test_acc = evaluate(weights, test)[0] if test is not None else None
    mu = np.sqrt(config.T) / config.sigma if (config.sigma > 0 and config.T > 0) else None
    return RunResult(
        weights=weights,
        train_accuracy=train_acc,
        train_loss=train_loss,
        test_accuracy=test_acc,
        per_step_log=log,
        config=config,
        mu=float(mu) if mu is not None else None,
    )


def dp_gd_train(
    data: Dataset, config: TrainConfig, test: Dataset | None = None
) -> RunResult:
    """Run T full-batch DP-GD steps with unit clipping and Gaussian noise."""
    return _train(data, config, test, clip=True)


def gd_train(
    data: Dataset, config: TrainConfig, test: Dataset | None = None
) -> RunResult:
    """Noise-free, clip-free twin of `dp_gd_train` for theory experiments."""
    if config.sigma != 0:
        config = TrainConfig(
            eta=config.eta,
            T=config.T,
            sigma=0.0,
            clip_norm=config.clip_norm,
            momentum_rho=config.momentum_rho,
            free_step=config.free_step,
            seed=config.seed,
        )
    return _train(data, config, test, clip=False)


def effective_snr(sigma: float, batch_size: int) -> tuple[float, float]:
    """Effective noise multiplier sigma/|B| and the update SNR |B|/sigma."""
    if not (isinstance(batch_size, int) and batch_size >= 1):
        raise ValueError(f"batch_size must be a positive integer, got {batch_size}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return 0.0, float("inf")
    return sigma / batch_size, batch_size / sigma
