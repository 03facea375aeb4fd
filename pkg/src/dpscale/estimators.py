"""Scikit-learn style estimators wrapping the DP trainer and the HPO loop.

`DPSoftmaxClassifier` is one DP-GD run with explicit hyperparameters;
`LinearScalingHPO` runs the full budget-planned sweep/fit/extrapolate
pipeline inside `fit` and exposes the final private model.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from dpscale.accounting import DpBudget, GdpBudget, dp_epsilon, plan_budget
from dpscale.hpo import SearchSpace, run_adaptive_hpo
from dpscale.optimizer import Dataset, TrainConfig, dp_gd_train


def _to_dataset(X, y) -> tuple[Dataset, np.ndarray]:
    X, y = check_X_y(X, y)
    classes, encoded = np.unique(y, return_inverse=True)
    return Dataset(X, encoded, len(classes)), classes


class DPSoftmaxClassifier(ClassifierMixin, BaseEstimator):
    """Linear softmax classifier trained with full-batch DP-GD.

    Parameters mirror one training run: learning rate, step count, noise
    multiplier, unit clipping by default, momentum 0.9, and an optional
    free final momentum step.
    """

    def __init__(
        self,
        eta: float = 0.1,
        steps: int = 100,
        sigma: float = 0.0,
        clip_norm: float = 1.0,
        momentum: float = 0.9,
        free_step: bool = True,
        random_state: int = 0,
    ):
        self.eta = eta
        self.steps = steps
        self.sigma = sigma
        self.clip_norm = clip_norm
        self.momentum = momentum
        self.free_step = free_step
        self.random_state = random_state

    def fit(self, X, y):
        data, self.classes_ = _to_dataset(X, y)
        config = TrainConfig(
            eta=self.eta,
            T=self.steps,
            sigma=self.sigma,
            clip_norm=self.clip_norm,
            momentum_rho=self.momentum,
            free_step=self.free_step,
            seed=self.random_state,
        )
        self.result_ = dp_gd_train(data, config)
        self.coef_ = self.result_.weights.W
        self.n_features_in_ = data.dim
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_.T

    def predict_proba(self, X):
        logits = self.decision_function(X)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def privacy_budget(self, delta: float) -> DpBudget:
        """(epsilon, delta)-DP guarantee of the fitted run."""
        check_is_fitted(self, "result_")
        if self.result_.mu is None:
            raise ValueError("noise-free runs carry no finite privacy guarantee")
        return DpBudget(dp_epsilon(GdpBudget(self.result_.mu), delta), delta)


class LinearScalingHPO(ClassifierMixin, BaseEstimator):
    """Privately tuned DP-GD classifier.

    `fit` plans the privacy budget, sweeps the total step size r = eta * T
    at low budgets, fits a degree-N polynomial r(mu), extrapolates to the
    final-run budget, and trains the released model.  The whole pipeline,
    sweeps included, composes to (epsilon, delta)-DP.
    """

    def __init__(
        self,
        epsilon: float = 1.0,
        delta: float = 1e-5,
        eps1: float = 0.1,
        eps2: float = 0.2,
        runs_per_sweep: int = 3,
        degree: int = 1,
        eta_min: float = 0.02,
        eta_max: float = 0.2,
        steps_min: int = 10,
        steps_max: int = 100,
        random_state: int = 0,
    ):
        self.epsilon = epsilon
        self.delta = delta
        self.eps1 = eps1
        self.eps2 = eps2
        self.runs_per_sweep = runs_per_sweep
        self.degree = degree
        self.eta_min = eta_min
        self.eta_max = eta_max
        self.steps_min = steps_min
        self.steps_max = steps_max
        self.random_state = random_state

    def fit(self, X, y):
        data, self.classes_ = _to_dataset(X, y)
        extra = ()
        if self.degree >= 2:
            # Higher-degree fits need one extra sweep stage per degree,
            # placed between eps2 and the total budget.
            extra = tuple(
                self.eps2 + (self.epsilon - self.eps2) * 0.25 * (i + 1)
                for i in range(self.degree - 1)
            )
        self.plan_ = plan_budget(
            DpBudget(self.epsilon, self.delta),
            self.eps1,
            self.eps2,
            self.runs_per_sweep,
            extra_eps=extra,
        )
        space = SearchSpace(self.eta_min, self.eta_max, self.steps_min, self.steps_max)
        self.report_ = run_adaptive_hpo(
            data, None, self.plan_, space, self.random_state, degree=self.degree
        )
        self.coef_ = self.report_.final.weights.W
        self.n_features_in_ = data.dim
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return X @ self.coef_.T

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def score(self, X, y, sample_weight=None):
        return float(np.average(self.predict(X) == np.asarray(y), weights=sample_weight))
