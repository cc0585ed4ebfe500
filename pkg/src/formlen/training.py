"""GRPO training loop over the segment-token environment.

One step: sample a group of episodes from the current policy, score them
with the configured reward variant, normalize rewards into group-relative
advantages, and take one ascent step on the tabular softmax logits. Training
is on-policy by default, so every probability ratio is exactly 1 and
clipping never fires; a stale-policy mode exists solely to exercise the
clipped surrogate end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import rewards
from .rlmath import ClipParams, GroupSample, clipped_surrogate, group_advantages, prob_ratio
from .simenv import (
    EnvConfig,
    Episode,
    PolicyParams,
    Rng,
    initial_policy,
    replay,
    replay_logp,
    sample_group,
)

REFLECT_NAME = "REFLECT"
EOS_NAME = "EOS"


@dataclass(frozen=True)
class StepStats:
    """Aggregates of one optimization step's sampled group."""

    step: int
    mean_length: float
    format_rate: float
    mean_reward: float
    truncation_rate: float
    reflect_rate: float


@dataclass
class SimConfig:
    """Everything one training run needs; fully determines the trace."""

    variant: str = "format_length_quadratic"
    p: float = 0.5
    steps: int = 300
    group_size: int = 8
    seed: int = 0
    learning_rate: float = 2.0
    verbosity_bias: float = 2.0
    kl_coeff: float = 0.0
    epsilon: float = 0.2
    clipping_enabled: bool = True
    stale_policy: bool = False
    env: EnvConfig = field(default_factory=EnvConfig)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.group_size < 2:
            raise ValueError(f"group_size must be >= 2, got {self.group_size}")
        # constructing these validates variant, p, epsilon, kl_coeff
        self.reward_config()
        self.clip_params()

    def reward_config(self) -> rewards.RewardConfig:
        return rewards.RewardConfig(
            variant=self.variant,
            length_params=rewards.LengthParams(p=self.p, l_max=self.env.l_max),
        )

    def clip_params(self) -> ClipParams:
        return ClipParams(
            epsilon=self.epsilon,
            kl_coeff=self.kl_coeff,
            clipping_enabled=self.clipping_enabled,
        )


@dataclass
class SimResult:
    trace: list[StepStats]
    clip_activations: int
    ratio_max_deviation: float
    policy: PolicyParams


def score_episode(episode: Episode, config: rewards.RewardConfig) -> rewards.RewardScore:
    record = SimpleNamespace(id="episode", length=episode.length)
    return rewards.score_response(
        record, config, format_ok=episode.format_ok, correct=episode.correct
    )


def _surrogate_coef(ratio: float, advantage: float, clip: ClipParams) -> tuple[float, bool]:
    """Gradient coefficient of the (possibly clipped) surrogate wrt logp.

    Returns (coefficient, clip_activated): zero coefficient when the clipped
    branch of the min is active, ratio*advantage otherwise.
    """
    value = clipped_surrogate(ratio, advantage, clip)
    unclipped = ratio * advantage
    if value < unclipped:
        return 0.0, True
    return unclipped, False


def _accumulate(grad: np.ndarray, episodes, coefs, env: EnvConfig, logits: np.ndarray) -> None:
    """Add each episode's score-function gradient, weighted per token."""
    for episode, coef in zip(episodes, coefs):
        if coef == 0.0 or not episode.tokens:
            continue
        for bucket, action, avail, probs in replay(episode, env, logits):
            for a, prob in zip(avail, probs):
                grad[bucket, a] -= coef * prob
            grad[bucket, action] += coef


@dataclass
class StepInfo:
    clip_activations: int
    ratio_max_deviation: float


def grpo_step(
    policy: PolicyParams,
    env: EnvConfig,
    group: list[Episode],
    reward_cfg: rewards.RewardConfig,
    clip: ClipParams,
    stale_policy: bool = False,
    ref_logits: np.ndarray | None = None,
) -> tuple[PolicyParams, StepInfo]:
    """One policy update from a scored group; returns the new policy.

    On-policy (default): each episode's ratio is exp(logp - logp) == 1, so
    the surrogate reduces to advantage-weighted REINFORCE and clipping can
    never bind. Stale-policy mode updates on the first half of the group,
    then re-evaluates the second half's log-probs under the half-updated
    logits so ratios stray from 1 and the clipped surrogate does real work.
    """
    values = [score_episode(ep, reward_cfg).value for ep in group]
    advantages = group_advantages(values)

    def token_coefs(episodes, advs, ratios):
        coefs = []
        activations = 0
        max_dev = 0.0
        for ep, adv, ratio in zip(episodes, advs, ratios):
            max_dev = max(max_dev, abs(ratio - 1.0))
            coef, activated = _surrogate_coef(ratio, adv, clip)
            if activated:
                activations += 1
            c = coef / len(ep.tokens) if ep.tokens else 0.0
            if clip.kl_coeff > 0.0 and ref_logits is not None:
                delta = replay_logp(ep, env, ref_logits) - ep.logp
                c -= clip.kl_coeff * (1.0 - math.exp(delta))
            coefs.append(c)
        return coefs, activations, max_dev

    lr = policy.learning_rate
    if not stale_policy:
        # fully on-policy: the sampling policy is the update policy
        sample = GroupSample(
            rewards=values,
            logp_new=[ep.logp for ep in group],
            logp_old=[ep.logp for ep in group],
        )
        ratios = [prob_ratio(new, old) for new, old in zip(sample.logp_new, sample.logp_old)]
        coefs, activations, max_dev = token_coefs(group, advantages, ratios)
        grad = np.zeros_like(policy.logits)
        _accumulate(grad, group, coefs, env, policy.logits)
        grad /= len(group)
        new_policy = policy.copy()
        new_policy.logits = policy.logits + lr * grad
        return new_policy, StepInfo(activations, max_dev)

    # stale-policy mode: update on the first half, re-evaluate the second
    half = len(group) // 2
    first, second = group[:half], group[half:]
    adv_first, adv_second = advantages[:half], advantages[half:]

    ratios_first = [prob_ratio(ep.logp, ep.logp) for ep in first]
    coefs, act1, dev1 = token_coefs(first, adv_first, ratios_first)
    grad = np.zeros_like(policy.logits)
    _accumulate(grad, first, coefs, env, policy.logits)
    grad /= max(len(first), 1)
    mid_logits = policy.logits + lr * grad

    ratios_second = [
        prob_ratio(replay_logp(ep, env, mid_logits), ep.logp) for ep in second
    ]
    coefs2, act2, dev2 = token_coefs(second, adv_second, ratios_second)
    grad2 = np.zeros_like(policy.logits)
    _accumulate(grad2, second, coefs2, env, mid_logits)
    grad2 /= max(len(second), 1)

    new_policy = policy.copy()
    new_policy.logits = mid_logits + lr * grad2
    return new_policy, StepInfo(act1 + act2, max(dev1, dev2))


def _group_stats(step: int, group: list[Episode], values: list[float]) -> StepStats:
    g = len(group)
    total_tokens = sum(len(ep.tokens) for ep in group)
    non_eos = sum(1 for ep in group for t in ep.tokens if t != EOS_NAME)
    reflects = sum(1 for ep in group for t in ep.tokens if t == REFLECT_NAME)
    return StepStats(
        step=step,
        mean_length=sum(ep.length for ep in group) / g,
        format_rate=sum(1 for ep in group if ep.format_ok) / g,
        mean_reward=sum(values) / g,
        truncation_rate=sum(1 for ep in group if ep.truncated) / g,
        reflect_rate=reflects / non_eos if non_eos else 0.0,
    )


def run_training(cfg: SimConfig) -> SimResult:
    """Run the configured number of GRPO steps; deterministic per seed."""
    env = cfg.env
    reward_cfg = cfg.reward_config()
    clip = cfg.clip_params()
    policy = initial_policy(cfg.learning_rate, cfg.seed, cfg.verbosity_bias)
    ref_logits = policy.logits.copy() if cfg.kl_coeff > 0.0 else None
    rng = Rng(cfg.seed)

    trace: list[StepStats] = []
    activations = 0
    max_dev = 0.0
    for step in range(1, cfg.steps + 1):
        group = sample_group(policy, env, cfg.group_size, rng)
        values = [score_episode(ep, reward_cfg).value for ep in group]
        trace.append(_group_stats(step, group, values))
        policy, info = grpo_step(
            policy, env, group, reward_cfg, clip,
            stale_policy=cfg.stale_policy, ref_logits=ref_logits,
        )
        activations += info.clip_activations
        max_dev = max(max_dev, info.ratio_max_deviation)

    return SimResult(
        trace=trace,
        clip_activations=activations,
        ratio_max_deviation=max_dev,
        policy=policy,
    )
