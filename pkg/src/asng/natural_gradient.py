"""Stochastic natural-gradient updates for distribution parameters.

All updates share one estimator: rank samples by objective value, give the
top quarter weight +1 and the bottom quarter -1 (ties beyond the quota get
0), and average the per-sample scores ``T(c_i) - theta``.  Because the
weights only depend on ranks, every update here is invariant under strictly
increasing transformations of the objective.

Three step rules consume the estimate:

* ``sng_step`` moves a fixed trust-region distance ``delta`` in the Fisher
  metric.
* ``asng_step`` adapts that distance online from the signal-to-noise ratio
  of an exponentially averaged, metric-whitened gradient trail; the running
  state lives in :class:`AsngState`.
* ``adam_ng_step`` feeds the metric-normalized estimate to a generic Adam
  rule (a baseline).

Steps that cannot make progress (all sample values tied, or a zero-norm
estimate) return their inputs unchanged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exp_family import (
    MixedValue,
    ProductParams,
    _check_value,
    _suff_stats_trusted,
    add_flat,
    fisher_quadratic_norm,
    flatten,
    project,
    sqrt_fisher_apply,
)
from .weight_opt import AdamState, adam_step

logger = logging.getLogger(__name__)

__all__ = [
    "AsngState",
    "utility_transform",
    "natural_gradient_estimate",
    "asng_step",
    "sng_step",
    "adam_ng_step",
    "snr_statistic",
]

_DIRECTIONS = ("minimize", "maximize")


@dataclass(frozen=True, eq=False)
class AsngState:
    """Adaptation state of the trust-region distance ``delta_init / big_delta``.

    ``s`` is the whitened gradient trail, ``gamma`` its accumulated weight
    (so ``|s|^2 / gamma`` estimates the squared signal-to-noise ratio), and
    ``big_delta`` the divisor adapted each step.  ``big_delta`` is kept in
    ``[delta_init / sqrt(n_theta), big_delta_max]``; the lower end is exactly
    where the averaging weight ``beta = delta_theta / sqrt(n_theta)``
    reaches 1.
    """

    delta_init: float
    alpha: float
    big_delta: float
    big_delta_max: float
    s: np.ndarray
    gamma: float
    t: int

    @classmethod
    def initial(
        cls,
        n_theta: int,
        delta_init: float = 1.0,
        alpha: float = 1.5,
        big_delta_max: float = 2.0**30,
    ) -> "AsngState":
        if n_theta < 1:
            raise ValueError("n_theta must be at least 1")
        if not (delta_init > 0.0 and math.isfinite(delta_init)):
            raise ValueError("delta_init must be positive and finite")
        if not alpha > 0.0:
            raise ValueError("alpha must be positive")
        lower = delta_init / math.sqrt(n_theta)
        if big_delta_max < lower:
            raise ValueError("big_delta_max is below delta_init/sqrt(n_theta)")
        return cls(
            delta_init=float(delta_init),
            alpha=float(alpha),
            big_delta=float(min(max(1.0, lower), big_delta_max)),
            big_delta_max=float(big_delta_max),
            s=np.zeros(n_theta),
            gamma=0.0,
            t=0,
        )

    @property
    def n_theta(self) -> int:
        return self.s.size

    @property
    def delta_theta(self) -> float:
        return self.delta_init / self.big_delta

    @property
    def beta(self) -> float:
        return self.delta_theta / math.sqrt(self.n_theta)


@dataclass(frozen=True)
class _StepInfo:
    """Diagnostics of one theta update (consumed by the run loop's trace)."""

    skipped: bool
    g_fisher_norm: float = math.nan
    delta_theta: float = math.nan
    beta: float = math.nan
    big_delta: float = math.nan
    snr: float = math.nan


def utility_transform(f_values: Sequence[float], direction: str) -> np.ndarray:
    """Rank-based weights in {-1, 0, +1} with zero sum.

    The best ``ceil(lambda/4)`` samples get +1 and the worst as many get -1
    ("best" respects ``direction``).  Ties are broken by stable sort on the
    sample index; samples sharing a boundary value beyond the quota get 0.
    All-equal values yield the all-zero vector, which callers treat as
    "skip this update".
    """
    f = np.asarray(f_values, dtype=np.float64)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("need at least two objective values")
    if not np.all(np.isfinite(f)):
        raise ValueError("objective values must be finite")
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}")
    u = np.zeros(f.size, dtype=np.int64)
    if f.max() == f.min():
        return u
    order = np.argsort(-f if direction == "maximize" else f, kind="stable")
    quota = -(-f.size // 4)  # ceil(lambda/4); 1 for the default lambda = 2
    u[order[:quota]] = 1
    u[order[-quota:]] = -1
    return u


def natural_gradient_estimate(
    params: ProductParams, samples: Sequence[MixedValue], weights: Sequence[float]
) -> np.ndarray:
    """Monte Carlo natural gradient ``(1/n) sum_i w_i (T(c_i) - theta)``.

    ``weights`` are normally the utility values; passing raw objective values
    instead gives the unnormalized likelihood-ratio estimator (useful for
    consistency checks against enumeration).
    """
    w = np.asarray(weights, dtype=np.float64)
    if len(samples) != w.size or w.size == 0:
        raise ValueError("need equally many samples and weights, at least one each")
    for ci in samples:
        _check_value(params, ci)
    return _ng_accumulate(params, samples, w)


def _ng_accumulate(params, samples, w) -> np.ndarray:
    # trusted core shared by the public estimator and the step functions;
    # the theta term drops exactly when the weights sum to zero, which the
    # utility transform guarantees
    g = np.zeros(params.n_theta)
    for wi, ci in zip(w, samples):
        if wi != 0.0:
            g += wi * _suff_stats_trusted(params, ci)
    wsum = w.sum()
    if wsum != 0.0:
        g -= wsum * flatten(params)
    g /= w.size
    return g


def _check_arity(samples, f_values):
    if len(samples) != len(f_values):
        raise ValueError("need equally many samples and objective values")
    if len(samples) < 2:
        raise ValueError("theta updates need at least two samples")


def _asng_step(
    state: AsngState,
    params: ProductParams,
    samples: Sequence[MixedValue],
    f_values: Sequence[float],
    direction: str,
):
    _check_arity(samples, f_values)
    if state.n_theta != params.n_theta:
        raise ValueError(
            f"state dimension {state.n_theta} does not match parameters "
            f"({params.n_theta})"
        )
    delta_theta = state.delta_theta
    beta = state.beta
    u = utility_transform(f_values, direction)
    if not u.any():
        return params, state, _StepInfo(skipped=True)
    g = _ng_accumulate(params, samples, u)
    gnorm = fisher_quadratic_norm(params, g)
    if gnorm == 0.0:
        logger.warning("zero-norm natural gradient estimate; skipping theta update")
        return params, state, _StepInfo(skipped=True)
    new_params = project(add_flat(params, (delta_theta / gnorm) * g))
    s = (1.0 - beta) * state.s + math.sqrt(beta * (2.0 - beta)) * (
        sqrt_fisher_apply(params, g) / gnorm
    )
    gamma = (1.0 - beta) ** 2 * state.gamma + beta * (2.0 - beta)
    snorm2 = float(s @ s)
    big_delta = state.big_delta * math.exp(beta * (gamma - snorm2 / state.alpha))
    big_delta = min(
        max(big_delta, state.delta_init / math.sqrt(state.n_theta)),
        state.big_delta_max,
    )
    new_state = AsngState(
        delta_init=state.delta_init,
        alpha=state.alpha,
        big_delta=big_delta,
        big_delta_max=state.big_delta_max,
        s=s,
        gamma=gamma,
        t=state.t + 1,
    )
    info = _StepInfo(
        skipped=False,
        g_fisher_norm=gnorm,
        delta_theta=delta_theta,
        beta=beta,
        big_delta=big_delta,
        snr=snorm2 / gamma,
    )
    return new_params, new_state, info


def asng_step(
    state: AsngState,
    params: ProductParams,
    samples: Sequence[MixedValue],
    f_values: Sequence[float],
    direction: str,
) -> tuple[ProductParams, AsngState]:
    """One adaptive step: move ``delta_theta`` in the Fisher metric along the
    utility-weighted natural gradient, project, then update the adaptation
    state from the whitened gradient trail.

    Tied objective values or a zero-norm estimate skip the update entirely
    (inputs returned unchanged, ``t`` not advanced).
    """
    for c in samples:
        _check_value(params, c)
    new_params, new_state, _ = _asng_step(state, params, samples, f_values, direction)
    return new_params, new_state


def _sng_step(params, samples, f_values, delta_fixed, direction):
    _check_arity(samples, f_values)
    if not (delta_fixed >= 0.0 and math.isfinite(delta_fixed)):
        raise ValueError("delta_fixed must be finite and nonnegative")
    u = utility_transform(f_values, direction)
    if not u.any():
        return params, _StepInfo(skipped=True)
    g = _ng_accumulate(params, samples, u)
    gnorm = fisher_quadratic_norm(params, g)
    if gnorm == 0.0:
        logger.warning("zero-norm natural gradient estimate; skipping theta update")
        return params, _StepInfo(skipped=True)
    new_params = project(add_flat(params, (delta_fixed / gnorm) * g))
    return new_params, _StepInfo(
        skipped=False, g_fisher_norm=gnorm, delta_theta=delta_fixed
    )


def sng_step(
    params: ProductParams,
    samples: Sequence[MixedValue],
    f_values: Sequence[float],
    delta_fixed: float,
    direction: str,
) -> ProductParams:
    """Non-adaptive counterpart of :func:`asng_step`: fixed trust-region
    distance ``delta_fixed``, no running state."""
    for c in samples:
        _check_value(params, c)
    new_params, _ = _sng_step(params, samples, f_values, delta_fixed, direction)
    return new_params


def _adam_ng_step(state, params, samples, f_values, step_size, direction):
    _check_arity(samples, f_values)
    if state.m.shape != (params.n_theta,):
        raise ValueError(
            f"state dimension {state.m.size} does not match parameters "
            f"({params.n_theta})"
        )
    u = utility_transform(f_values, direction)
    if not u.any():
        return params, state, _StepInfo(skipped=True)
    g = _ng_accumulate(params, samples, u)
    gnorm = fisher_quadratic_norm(params, g)
    if gnorm == 0.0:
        logger.warning("zero-norm natural gradient estimate; skipping theta update")
        return params, state, _StepInfo(skipped=True)
    # the utility-weighted estimate already points toward better samples, so
    # Adam always ascends it; `direction` only affected the ranking above
    update, new_state = adam_step(
        state, np.zeros(params.n_theta), g / gnorm, step_size, "maximize"
    )
    new_params = project(add_flat(params, update))
    return new_params, new_state, _StepInfo(
        skipped=False, g_fisher_norm=gnorm
    )


def adam_ng_step(
    state: AdamState,
    params: ProductParams,
    samples: Sequence[MixedValue],
    f_values: Sequence[float],
    step_size: float,
    direction: str,
) -> tuple[ProductParams, AdamState]:
    """Baseline: metric-normalized natural gradient fed to a generic Adam
    rule, followed by projection."""
    for c in samples:
        _check_value(params, c)
    new_params, new_state, _ = _adam_ng_step(
        state, params, samples, f_values, step_size, direction
    )
    return new_params, new_state


def snr_statistic(state: AsngState, beta: float | None = None) -> float:
    """Diagnostic signal-to-noise ratio ``|s|^2 / gamma``.

    Meaningful once the trail has warmed up; pass the current ``beta`` to
    enforce the warm-up precondition ``t >= ceil(1/beta)``.
    """
    if state.gamma == 0.0:
        raise ValueError("snr is undefined before the first accepted update")
    if beta is not None and state.t < math.ceil(1.0 / beta):
        raise ValueError(
            f"snr requested before warm-up: t={state.t} < ceil(1/beta)="
            f"{math.ceil(1.0 / beta)}"
        )
    return float(state.s @ state.s) / state.gamma
