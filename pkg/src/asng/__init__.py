"""Adaptive stochastic natural gradient for mixed search spaces.

The package optimizes a function of differentiable continuous weights and
black-box categorical or range-bounded numeric hyperparameters by relaxing
the latter into an exponential-family distribution and running natural
gradient ascent on it with an online step-size adaptation, alternating with
plain stochastic gradient steps on the weights.
"""

from .exp_family import (
    Categorical,
    GaussianBlock,
    CategoricalBlock,
    Integer,
    MixedValue,
    ProductParams,
    Real,
    ShapeError,
    SingularMetricError,
    add_flat,
    clip_and_round,
    fisher_quadratic_norm,
    flatten,
    init_max_entropy,
    most_likely,
    project,
    sample,
    sample_batch,
    score,
    shape_from_text,
    shape_to_text,
    sqrt_fisher_apply,
    sufficient_statistics,
)
from .natural_gradient import (
    AsngState,
    adam_ng_step,
    asng_step,
    natural_gradient_estimate,
    sng_step,
    snr_statistic,
    utility_transform,
)
from .weight_opt import (
    AdamState,
    CosineSchedule,
    SgdMomentumState,
    adam_step,
    clip_grad_norm,
    cosine_lr,
    mc_weight_gradient,
    sgd_momentum_step,
)
from .joint_loop import (
    JointProblem,
    LoopConfig,
    LoopResult,
    NonFiniteEvaluationError,
    TraceRow,
    run,
    theta_entropy_summary,
)
from .toy_bench import (
    BenchConfig,
    RunRecord,
    Summary,
    ToyProblem,
    run_experiment,
    run_single,
    success_threshold,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "Categorical",
    "Integer",
    "Real",
    "MixedValue",
    "ProductParams",
    "CategoricalBlock",
    "GaussianBlock",
    "ShapeError",
    "SingularMetricError",
    "shape_from_text",
    "shape_to_text",
    "init_max_entropy",
    "sample",
    "sample_batch",
    "sufficient_statistics",
    "flatten",
    "score",
    "fisher_quadratic_norm",
    "sqrt_fisher_apply",
    "add_flat",
    "project",
    "most_likely",
    "clip_and_round",
    "AsngState",
    "utility_transform",
    "natural_gradient_estimate",
    "asng_step",
    "sng_step",
    "adam_ng_step",
    "snr_statistic",
    "SgdMomentumState",
    "AdamState",
    "CosineSchedule",
    "mc_weight_gradient",
    "sgd_momentum_step",
    "adam_step",
    "cosine_lr",
    "clip_grad_norm",
    "JointProblem",
    "LoopConfig",
    "LoopResult",
    "TraceRow",
    "NonFiniteEvaluationError",
    "run",
    "theta_entropy_summary",
    "ToyProblem",
    "BenchConfig",
    "RunRecord",
    "Summary",
    "run_single",
    "run_experiment",
    "summarize",
    "success_threshold",
    "__version__",
]
