"""Plain first-order optimizers for the differentiable weights.

Nothing here knows about distributions: gradients come in, parameter arrays
go out.  States are immutable; steps return (new point, new state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

__all__ = [
    "SgdMomentumState",
    "CosineSchedule",
    "AdamState",
    "mc_weight_gradient",
    "sgd_momentum_step",
    "cosine_lr",
    "clip_grad_norm",
    "adam_step",
]

_DIRECTIONS = ("minimize", "maximize")


def _step_sign(direction: str) -> float:
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}")
    return -1.0 if direction == "minimize" else 1.0


def mc_weight_gradient(grads: Sequence[np.ndarray]) -> np.ndarray:
    """Average per-sample gradients; errors on an empty list."""
    if len(grads) == 0:
        raise ValueError("need at least one gradient sample")
    return np.mean(np.stack([np.asarray(g, dtype=np.float64) for g in grads]), axis=0)


@dataclass(frozen=True, eq=False)
class SgdMomentumState:
    velocity: np.ndarray
    momentum: float = 0.9

    @classmethod
    def initial(cls, shape, momentum: float = 0.9) -> "SgdMomentumState":
        if not 0.0 <= momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        return cls(velocity=np.zeros(shape), momentum=momentum)


def sgd_momentum_step(
    state: SgdMomentumState,
    x: np.ndarray,
    grad: np.ndarray,
    eps_x: float,
    direction: str,
) -> tuple[np.ndarray, SgdMomentumState]:
    """Heavy-ball step: ``v <- momentum*v + g``; ``x <- x -+ eps_x * v``."""
    sign = _step_sign(direction)
    if grad.shape != x.shape or state.velocity.shape != x.shape:
        raise ValueError("x, grad and velocity must share one shape")
    v = state.momentum * state.velocity + grad
    return x + sign * eps_x * v, replace(state, velocity=v)


@dataclass(frozen=True)
class CosineSchedule:
    """Monotone cosine decay from ``eps_initial`` at t=0 to 0 at t=total_steps."""

    eps_initial: float
    total_steps: int

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be at least 1")
        if not (self.eps_initial >= 0.0 and math.isfinite(self.eps_initial)):
            raise ValueError("eps_initial must be finite and nonnegative")


def cosine_lr(schedule: CosineSchedule, t: int) -> float:
    if not 0 <= t <= schedule.total_steps:
        raise ValueError(
            f"step {t} outside schedule range [0, {schedule.total_steps}]"
        )
    return schedule.eps_initial * 0.5 * (1.0 + math.cos(math.pi * t / schedule.total_steps))


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    """Rescale ``grad`` to Euclidean norm ``max_norm`` if it exceeds it."""
    if not max_norm > 0.0:
        raise ValueError("max_norm must be positive")
    norm = float(np.sqrt((grad * grad).sum()))
    if norm <= max_norm:
        return grad
    return grad * (max_norm / norm)


@dataclass(frozen=True, eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    tiny: float = 1e-8

    @classmethod
    def initial(
        cls, shape, beta1: float = 0.9, beta2: float = 0.999, tiny: float = 1e-8
    ) -> "AdamState":
        return cls(m=np.zeros(shape), v=np.zeros(shape), t=0, beta1=beta1, beta2=beta2, tiny=tiny)


def adam_step(
    state: AdamState,
    x: np.ndarray,
    grad: np.ndarray,
    eps_x: float,
    direction: str,
) -> tuple[np.ndarray, AdamState]:
    """Standard bias-corrected adaptive-moment step."""
    sign = _step_sign(direction)
    if grad.shape != x.shape or state.m.shape != x.shape:
        raise ValueError("x, grad and moments must share one shape")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_x = x + sign * eps_x * m_hat / (np.sqrt(v_hat) + state.tiny)
    return new_x, replace(state, m=m, v=v, t=t)
