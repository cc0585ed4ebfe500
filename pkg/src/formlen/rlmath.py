"""Policy-gradient numeric kernels: group-relative advantages, the clipped
probability-ratio surrogate, generalized advantage estimation, the TD value
loss, and a nonnegative KL penalty estimator.

Everything here is a pure function over plain floats/sequences; the
simulator and the tests are the only callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class ClipParams:
    """PPO clipping range, KL weight, and the clipping on/off switch."""

    epsilon: float = 0.2
    kl_coeff: float = 0.0
    clipping_enabled: bool = True

    def __post_init__(self):
        if self.clipping_enabled and not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0,1) when clipping, got {self.epsilon}")
        if self.kl_coeff < 0.0:
            raise ValueError(f"kl_coeff must be nonnegative, got {self.kl_coeff}")


@dataclass(frozen=True)
class GroupSample:
    """G responses for one prompt: rewards plus per-response log-probs."""

    rewards: Sequence[float]
    logp_new: Sequence[float]
    logp_old: Sequence[float]
    logp_ref: Sequence[float] | None = None

    def __post_init__(self):
        g = len(self.rewards)
        if g < 2:
            raise ValueError(f"group needs at least 2 responses, got {g}")
        for name in ("logp_new", "logp_old"):
            if len(getattr(self, name)) != g:
                raise ValueError(f"{name} length {len(getattr(self, name))} != group size {g}")
        if self.logp_ref is not None and len(self.logp_ref) != g:
            raise ValueError("logp_ref length mismatch")


@dataclass(frozen=True)
class Trajectory:
    """Finite-horizon rollout for advantage estimation."""

    rewards: Sequence[float]
    values: Sequence[float]
    bootstrap_value: float = 0.0
    gamma: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if len(self.rewards) < 1:
            raise ValueError("trajectory must have at least one step")
        if len(self.rewards) != len(self.values):
            raise ValueError(
                f"rewards length {len(self.rewards)} != values length {len(self.values)}"
            )
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0,1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0,1], got {self.lam}")


def group_advantages(rewards: Sequence[float], sigma_floor: float = 1e-8) -> list[float]:
    """Normalize each reward by its group's mean and population std.

    The std is floored at sigma_floor so the degenerate all-equal group is
    total; that case returns exact zeros.
    """
    g = len(rewards)
    if g < 2:
        raise ValueError(f"group needs at least 2 rewards, got {g}")
    if sigma_floor <= 0.0:
        raise ValueError(f"sigma_floor must be positive, got {sigma_floor}")
    first = rewards[0]
    if all(r == first for r in rewards):
        return [0.0] * g
    mean = sum(rewards) / g
    var = sum((r - mean) ** 2 for r in rewards) / g
    std = math.sqrt(var)
    denom = max(std, sigma_floor)
    return [(r - mean) / denom for r in rewards]


def prob_ratio(logp_new: float, logp_old: float) -> float:
    """exp(logp_new - logp_old); exactly 1 on-policy."""
    if not (math.isfinite(logp_new) and math.isfinite(logp_old)):
        raise ValueError(f"log-probs must be finite, got ({logp_new}, {logp_old})")
    return math.exp(logp_new - logp_old)


def clipped_surrogate(ratio: float, advantage: float, params: ClipParams) -> float:
    """Pessimistic clipped objective min(r*A, clip(r, 1-eps, 1+eps)*A).

    With clipping disabled this is plain r*A, matching fully on-policy
    training where the ratio is identically 1 and clipping is inert.
    """
    if ratio <= 0.0:
        raise ValueError(f"ratio must be positive, got {ratio}")
    if not params.clipping_enabled:
        return ratio * advantage
    clipped = min(max(ratio, 1.0 - params.epsilon), 1.0 + params.epsilon)
    return min(ratio * advantage, clipped * advantage)


def gae(traj: Trajectory) -> list[float]:
    """Exponentially weighted TD errors via the standard backward recursion.

    lam=0 reduces to single-step TD errors; lam=1, gamma=1 recovers
    Monte-Carlo return minus value.
    """
    rewards, values = traj.rewards, traj.values
    t_len = len(rewards)
    advantages = [0.0] * t_len
    running = 0.0
    for t in range(t_len - 1, -1, -1):
        next_value = traj.bootstrap_value if t == t_len - 1 else values[t + 1]
        delta = rewards[t] + traj.gamma * next_value - values[t]
        running = delta + traj.gamma * traj.lam * running
        advantages[t] = running
    return advantages


def td_value_loss(
    values: Sequence[float],
    rewards: Sequence[float],
    next_values: Sequence[float],
    gamma: float,
) -> float:
    """Mean squared one-step TD error of a value predictor."""
    if not values:
        raise ValueError("td_value_loss over empty sequences is undefined")
    if not (len(values) == len(rewards) == len(next_values)):
        raise ValueError(
            f"length mismatch: values={len(values)} rewards={len(rewards)} "
            f"next_values={len(next_values)}"
        )
    total = 0.0
    for v, r, nv in zip(values, rewards, next_values):
        err = v - (r + gamma * nv)
        total += err * err
    return total / len(values)


def kl_penalty(logp_new: float, logp_ref: float) -> float:
    """Nonnegative KL estimator exp(d) - d - 1 with d = logp_ref - logp_new.

    Zero exactly when the two log-probs agree, positive otherwise.
    """
    if not (math.isfinite(logp_new) and math.isfinite(logp_ref)):
        raise ValueError(f"log-probs must be finite, got ({logp_new}, {logp_ref})")
    delta = logp_ref - logp_new
    return math.exp(delta) - delta - 1.0
