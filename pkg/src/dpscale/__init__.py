"""Privately tuned DP gradient descent on linear softmax classifiers.

Exact Gaussian-DP accounting and budget planning, a full-batch DP-GD
trainer, low-budget hyperparameter sweeps with linear/polynomial
extrapolation of the total step size r = eta * T, and empirical checks of
the noisy-radius bound and the softmax Lipschitz constant.
"""

from dpscale.accounting import (
    DpBudget,
    GdpBudget,
    HpoBudgetPlan,
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
from dpscale.data import BlobSpec, gen_blobs, load_csv, write_csv
from dpscale.estimators import DPSoftmaxClassifier, LinearScalingHPO
from dpscale.hpo import (
    HpoReport,
    ScalingFit,
    SearchSpace,
    SweepFailedError,
    SweepResult,
    decompose_r,
    fit_scaling,
    grid_search,
    random_search,
    rerr,
    run_adaptive_hpo,
    sample_r,
    sweep,
)
from dpscale.optimizer import (
    Dataset,
    DivergedError,
    ModelWeights,
    RunResult,
    TrainConfig,
    clipped_gradient_sum,
    dp_gd_train,
    effective_snr,
    evaluate,
    gd_train,
)
from dpscale.theorycheck import (
    QuadraticProblem,
    RadiusReport,
    contraction_factor,
    radius_bound,
    radius_experiment,
    softmax_hessian_probe,
)

__version__ = "0.1.0"

__all__ = [
    "BlobSpec",
    "DPSoftmaxClassifier",
    "Dataset",
    "DivergedError",
    "DpBudget",
    "GdpBudget",
    "HpoBudgetPlan",
    "HpoReport",
    "InfeasibleBudgetError",
    "InsufficientBudgetError",
    "LinearScalingHPO",
    "ModelWeights",
    "QuadraticProblem",
    "RadiusReport",
    "RunResult",
    "ScalingFit",
    "SearchSpace",
    "SweepFailedError",
    "SweepResult",
    "TrainConfig",
    "calibrate_sigma",
    "clipped_gradient_sum",
    "compose_gdp",
    "contraction_factor",
    "decompose_r",
    "dp_epsilon",
    "dp_gd_train",
    "dp_to_gdp",
    "effective_snr",
    "evaluate",
    "fit_scaling",
    "gd_train",
    "gdp_of_run",
    "gdp_to_dp",
    "gen_blobs",
    "grid_search",
    "load_csv",
    "plan_budget",
    "radius_bound",
    "radius_experiment",
    "random_search",
    "rerr",
    "run_adaptive_hpo",
    "sample_r",
    "softmax_hessian_probe",
    "sweep",
    "write_csv",
]
