"""Alternating optimization of differentiable weights and distribution
parameters over a black-box mixed domain.

Each iteration draws two independent batches from the current distribution:
one to Monte Carlo average the weight gradient (weights move first, by
momentum SGD under a cosine-annealed step size), one to evaluate the
objective at the already-updated weights for the distribution update.
Success, when a predicate is given, is checked against the iteration's
samples after both updates.

Randomness is reproducible by construction: the draws of iteration ``t``
come from substreams derived from ``(seed, t, phase)``, so tracing,
early-stopping or diagnostic changes never shift the sample sequence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .exp_family import (
    CategoricalBlock,
    MixedValue,
    ProductParams,
    Shape,
    init_max_entropy,
    sample_batch,
)
from .natural_gradient import AsngState, _adam_ng_step, _asng_step, _sng_step
from .weight_opt import (
    AdamState,
    CosineSchedule,
    SgdMomentumState,
    clip_grad_norm,
    cosine_lr,
    mc_weight_gradient,
    sgd_momentum_step,
)

logger = logging.getLogger(__name__)

__all__ = [
    "NonFiniteEvaluationError",
    "JointProblem",
    "LoopConfig",
    "TraceRow",
    "LoopResult",
    "run",
    "theta_entropy_summary",
]

_PHASE_X = 0
_PHASE_THETA = 1

_THETA_ALGOS = ("asng", "sng", "adam_ng")
_SUCCESS_CHECKS = ("all", "theta_only")


class NonFiniteEvaluationError(RuntimeError):
    """A problem callback produced a non-finite gradient or value."""


def _phase_rng(seed: int, t: int, phase: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, t, phase)))


@dataclass(frozen=True)
class JointProblem:
    """Callbacks defining one problem instance.

    ``grad_fn(x, samples, rng)`` returns one weight gradient per sample;
    ``value_fn(x, samples, rng)`` one objective value per sample.  Each is
    invoked once per parameter update with that update's full batch and a
    dedicated random stream, so a problem whose stochasticity is "one noise
    draw per update" simply draws from ``rng`` once per call.
    ``success_fn(x, c)`` (optional) decides whether a sampled configuration
    solves the problem at the current weights.
    """

    x_shape: tuple[int, ...]
    shape: Shape
    grad_fn: Callable[[np.ndarray, list[MixedValue], np.random.Generator], Sequence[np.ndarray]]
    value_fn: Callable[[np.ndarray, list[MixedValue], np.random.Generator], Sequence[float]]
    success_fn: Callable[[np.ndarray, MixedValue], bool] | None = None


@dataclass(frozen=True)
class LoopConfig:
    max_iters: int
    eps_x_schedule: CosineSchedule
    seed: int = 0
    direction: str = "minimize"
    theta_algo: str = "asng"
    lambda_x: int = 2
    lambda_theta: int = 2
    delta_init: float = 1.0
    alpha: float = 1.5
    big_delta_max: float = 2.0**30
    delta_fixed: float = 1.0
    adam_step_size: float = 1e-3
    momentum: float = 0.9
    clip_grad: float | None = None
    stop_on_success: bool = False
    success_check: str = "all"
    trace: bool = False

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.theta_algo not in _THETA_ALGOS:
            raise ValueError(f"theta_algo must be one of {_THETA_ALGOS}")
        if self.success_check not in _SUCCESS_CHECKS:
            raise ValueError(f"success_check must be one of {_SUCCESS_CHECKS}")
        if self.lambda_x < 1:
            raise ValueError("lambda_x must be at least 1")
        if self.lambda_theta < 2:
            raise ValueError("lambda_theta must be at least 2")


@dataclass(frozen=True)
class TraceRow:
    """Per-iteration diagnostics; fields that an algorithm does not define
    (e.g. beta for sng) are NaN."""

    t: int
    delta_theta: float
    beta: float
    g_fisher_norm: float
    snr: float
    big_delta: float
    hit: bool


@dataclass(frozen=True, eq=False)
class LoopResult:
    x: np.ndarray
    params: ProductParams
    theta_state: Union[AsngState, AdamState, None]
    trace: list[TraceRow] = field(default_factory=list)
    hit_iteration: int | None = None


def _check_finite_grads(grads, t, samples):
    for g, c in zip(grads, samples):
        if not np.all(np.isfinite(g)):
            raise NonFiniteEvaluationError(
                f"gradient callback returned a non-finite entry at iteration {t} "
                f"for sample {c}"
            )


def run(
    problem: JointProblem,
    config: LoopConfig,
    x0: np.ndarray,
    params0: ProductParams | None = None,
) -> LoopResult:
    """Run the alternating loop from ``(x0, params0)``.

    With ``max_iters = 0`` the inputs come back unchanged.  ``hit_iteration``
    is the first iteration (1-based) at which any of that iteration's
    samples satisfied the success predicate, or None.
    """
    x = np.array(x0, dtype=np.float64)
    if x.shape != tuple(problem.x_shape):
        raise ValueError(f"x0 must have shape {tuple(problem.x_shape)}")
    params = init_max_entropy(problem.shape) if params0 is None else params0

    theta_state: Union[AsngState, AdamState, None]
    if config.theta_algo == "asng":
        theta_state = AsngState.initial(
            params.n_theta, config.delta_init, config.alpha, config.big_delta_max
        )
    elif config.theta_algo == "adam_ng":
        theta_state = AdamState.initial(params.n_theta)
    else:
        theta_state = None

    sgd = SgdMomentumState.initial(x.shape, config.momentum)
    trace: list[TraceRow] = []
    hit: int | None = None

    for t in range(config.max_iters):
        rng_x = _phase_rng(config.seed, t, _PHASE_X)
        x_samples = sample_batch(params, rng_x, config.lambda_x)
        grads = problem.grad_fn(x, x_samples, rng_x)
        if len(grads) != config.lambda_x:
            raise ValueError("grad_fn must return one gradient per sample")
        _check_finite_grads(grads, t, x_samples)
        g = mc_weight_gradient(grads)
        if config.clip_grad is not None:
            g = clip_grad_norm(g, config.clip_grad)
        x, sgd = sgd_momentum_step(
            sgd, x, g, cosine_lr(config.eps_x_schedule, t), config.direction
        )

        rng_theta = _phase_rng(config.seed, t, _PHASE_THETA)
        theta_samples = sample_batch(params, rng_theta, config.lambda_theta)
        f_values = np.asarray(
            problem.value_fn(x, theta_samples, rng_theta), dtype=np.float64
        )
        if f_values.shape != (config.lambda_theta,):
            raise ValueError("value_fn must return one value per sample")
        if not np.all(np.isfinite(f_values)):
            bad = theta_samples[int(np.flatnonzero(~np.isfinite(f_values))[0])]
            raise NonFiniteEvaluationError(
                f"value callback returned a non-finite entry at iteration {t} "
                f"for sample {bad}"
            )

        if config.theta_algo == "asng":
            params, theta_state, info = _asng_step(
                theta_state, params, theta_samples, f_values, config.direction
            )
        elif config.theta_algo == "sng":
            params, info = _sng_step(
                params, theta_samples, f_values, config.delta_fixed, config.direction
            )
        else:
            params, theta_state, info = _adam_ng_step(
                theta_state, params, theta_samples, f_values,
                config.adam_step_size, config.direction,
            )

        if problem.success_fn is not None and hit is None:
            candidates = (
                theta_samples
                if config.success_check == "theta_only"
                else x_samples + theta_samples
            )
            if any(problem.success_fn(x, c) for c in candidates):
                hit = t + 1

        if config.trace:
            trace.append(
                TraceRow(
                    t=t,
                    delta_theta=info.delta_theta,
                    beta=info.beta,
                    g_fisher_norm=info.g_fisher_norm,
                    snr=info.snr,
                    big_delta=info.big_delta,
                    hit=hit == t + 1,
                )
            )
        if hit is not None and config.stop_on_success:
            break

    return LoopResult(
        x=x, params=params, theta_state=theta_state, trace=trace, hit_iteration=hit
    )


def theta_entropy_summary(params: ProductParams) -> float:
    """Mean over categorical variables of the row maximum probability.

    1.0 means every row is concentrated on one category; 1/m is the uniform
    floor.  Undefined (raises) without categorical variables.
    """
    maxima = []
    for block in params.blocks:
        if isinstance(block, CategoricalBlock):
            maxima.append(block.entropy_proxy())
    if not maxima:
        raise ValueError("no categorical variables to summarize")
    return float(np.concatenate(maxima).mean())
