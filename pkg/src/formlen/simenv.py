"""Desk-scale response environment for policy-gradient experiments.

An episode is a sequence of segment tokens (reasoning steps, reflections,
and the pieces of one boxed answer), each with a fixed token cost. The
policy picks actions from phase-dependent menus over softmax logits bucketed
by (cumulative-cost decile, box phase). Whether a sampled answer is good or
bad is the environment's call: the probability of a good answer grows with
the number of reasoning tokens emitted so far, which is what gives length a
causal path to correctness.

Episodes truncate when their cumulative cost reaches the context limit.
A truncation that cuts through an unfinished box destroys the format;
a box completed before the cut survives it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import backend
from ._pure import (
    A_ANSWER,
    A_CLOSE,
    A_EOS,
    A_OPEN,
    A_REFLECT,
    A_STEP,
    K_BAD,
    K_CLOSE,
    K_EOS,
    K_GOOD,
    K_OPEN,
    K_REFLECT,
    K_STEP,
    N_ACTIONS,
    N_BUCKETS,
    N_PHASES,
    PHASE_ACTIONS,
    PHASE_ANSWERED,
    PHASE_BEFORE,
    PHASE_DONE,
    PHASE_IN_BOX,
)

KIND_NAMES = ("STEP", "REFLECT", "OPEN_BOX", "GOOD_ANSWER", "BAD_ANSWER", "CLOSE_BOX", "EOS")
ACTION_NAMES = ("STEP", "REFLECT", "OPEN_BOX", "ANSWER", "CLOSE_BOX", "EOS")
KIND_INDEX = {name: i for i, name in enumerate(KIND_NAMES)}

# policy action that produced each token kind (answers collapse to ANSWER)
ACTION_OF_KIND = (A_STEP, A_REFLECT, A_OPEN, A_ANSWER, A_ANSWER, A_CLOSE, A_EOS)

_RENDER = {
    K_STEP: "We compute the next quantity. ",
    K_REFLECT: "Wait, we verify the previous result. ",
    K_OPEN: "The final answer is \\boxed{",
    K_GOOD: "42",
    K_BAD: "17",
    K_CLOSE: "}.",
    K_EOS: "",
}


@dataclass(frozen=True)
class EnvConfig:
    """Environment constants: context budget, per-kind costs, answer odds."""

    l_max: int = 64
    cost_step: int = 4
    cost_reflect: int = 3
    cost_open: int = 1
    cost_answer: int = 1
    cost_close: int = 1
    cost_eos: int = 0
    odds_base: float = 0.3
    odds_gain: float = 0.04
    odds_cap: float = 0.85
    max_segments: int = 256
    temperature: float = 1.0

    def __post_init__(self):
        if self.l_max < 1:
            raise ValueError(f"l_max must be >= 1, got {self.l_max}")
        for name in ("cost_step", "cost_reflect", "cost_open", "cost_answer", "cost_close"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.cost_eos < 0:
            raise ValueError("cost_eos must be nonnegative")
        if not 0.0 <= self.odds_base <= 1.0 or not 0.0 <= self.odds_cap <= 1.0:
            raise ValueError("answer odds must lie in [0,1]")
        if self.odds_gain < 0.0:
            raise ValueError("odds_gain must be nonnegative")
        if self.max_segments < 1:
            raise ValueError("max_segments must be >= 1")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        costs = np.array(
            [
                self.cost_step,
                self.cost_reflect,
                self.cost_open,
                self.cost_answer,
                self.cost_answer,
                self.cost_close,
                self.cost_eos,
            ],
            dtype=np.int64,
        )
        costs.setflags(write=False)
        object.__setattr__(self, "_kind_costs", costs)

    def kind_costs(self) -> np.ndarray:
        """Per-kind cost vector in kind-index order; shared, read-only."""
        return self._kind_costs


@dataclass
class PolicyParams:
    """Tabular softmax policy: one logit per (bucket, action) pair."""

    logits: np.ndarray
    learning_rate: float = 2.0
    seed: int = 0

    def __post_init__(self):
        self.logits = np.ascontiguousarray(self.logits, dtype=np.float64)
        if self.logits.shape != (N_BUCKETS, N_ACTIONS):
            raise ValueError(
                f"logits must have shape {(N_BUCKETS, N_ACTIONS)}, got {self.logits.shape}"
            )
        if not np.isfinite(self.logits).all():
            raise ValueError("logits must be finite")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")

    def copy(self) -> "PolicyParams":
        return replace(self, logits=self.logits.copy())


def initial_policy(learning_rate: float = 2.0, seed: int = 0, verbosity_bias: float = 2.0) -> PolicyParams:
    """Zero logits, except a bias toward STEP/REFLECT outside the box.

    The bias makes the untrained policy verbose, mimicking a base model
    that rambles before it learns to answer cleanly.
    """
    logits = np.zeros((N_BUCKETS, N_ACTIONS), dtype=np.float64)
    for decile in range(10):
        for phase in (PHASE_BEFORE, PHASE_DONE):
            bucket = decile * N_PHASES + phase
            logits[bucket, A_STEP] = verbosity_bias
            logits[bucket, A_REFLECT] = verbosity_bias
    return PolicyParams(logits=logits, learning_rate=learning_rate, seed=seed)


@dataclass(frozen=True)
class Episode:
    """One rollout: token kinds, total cost, and the outcome flags."""

    tokens: tuple[str, ...]
    length: int
    format_ok: bool
    correct: bool
    truncated: bool
    logp: float

    @property
    def kind_ids(self) -> list[int]:
        return [KIND_INDEX[t] for t in self.tokens]


class Rng:
    """A splitmix64 stream; the sole source of randomness in a simulation."""

    def __init__(self, seed: int):
        self.state = seed & ((1 << 64) - 1)


def _episode_from_kinds(kinds: list[int], logp: float, env: EnvConfig) -> Episode:
    costs = env.kind_costs()
    length = int(sum(int(costs[k]) for k in kinds))
    answered = None
    completed = False
    for k in kinds:
        if k in (K_GOOD, K_BAD):
            answered = k
        elif k == K_CLOSE and answered is not None:
            completed = True
    ended = bool(kinds) and kinds[-1] == K_EOS
    return Episode(
        tokens=tuple(KIND_NAMES[k] for k in kinds),
        length=length,
        format_ok=completed,
        correct=completed and answered == K_GOOD,
        truncated=not ended,
        logp=logp,
    )


def rollout(policy: PolicyParams, env: EnvConfig, rng: Rng) -> Episode:
    """Sample one episode; deterministic given (policy, env, rng.state)."""
    out_kinds = np.empty(env.max_segments, dtype=np.int64)
    count, logp, rng.state = backend.rollout_kernel(
        policy.logits,
        env.temperature,
        env.l_max,
        env.kind_costs(),
        env.odds_base,
        env.odds_gain,
        env.odds_cap,
        env.max_segments,
        rng.state,
        out_kinds,
    )
    return _episode_from_kinds([int(k) for k in out_kinds[:count]], logp, env)


def sample_group(policy: PolicyParams, env: EnvConfig, g: int, rng: Rng) -> list[Episode]:
    """g independent rollouts advancing one rng stream."""
    if g < 2:
        raise ValueError(f"group size must be >= 2, got {g}")
    return [rollout(policy, env, rng) for _ in range(g)]


def bucket_of(cost: int, phase: int, l_max: int) -> int:
    decile = (10 * cost) // l_max
    if decile > 9:
        decile = 9
    return decile * N_PHASES + phase


def _phase_after(phase: int, kind: int) -> int:
    if kind == K_OPEN:
        return PHASE_IN_BOX
    if kind in (K_GOOD, K_BAD):
        return PHASE_ANSWERED
    if kind == K_CLOSE:
        return PHASE_DONE
    return phase


def masked_probs(logits_row: np.ndarray, avail: tuple[int, ...], temperature: float) -> list[float]:
    """Softmax over the available actions, same evaluation order as the kernels."""
    m = logits_row[avail[0]] / temperature
    for a in avail[1:]:
        s = logits_row[a] / temperature
        if s > m:
            m = s
    exps = [math.exp(logits_row[a] / temperature - m) for a in avail]
    total = sum(exps)
    return [e / total for e in exps]


def replay(episode: Episode, env: EnvConfig, logits: np.ndarray):
    """Walk an episode's decisions again under the given logits.

    Yields (bucket, action, avail, probs) per token, where probs aligns with
    avail. Needs no randomness: the environment's good/bad draw is visible
    in the recorded kind.
    """
    cost = 0
    phase = PHASE_BEFORE
    costs = env.kind_costs()
    for kind in episode.kind_ids:
        bucket = bucket_of(cost, phase, env.l_max)
        avail = PHASE_ACTIONS[phase]
        probs = masked_probs(logits[bucket], avail, env.temperature)
        yield bucket, ACTION_OF_KIND[kind], avail, probs
        cost += int(costs[kind])
        phase = _phase_after(phase, kind)


def replay_logp(episode: Episode, env: EnvConfig, logits: np.ndarray) -> float:
    """Log-probability of the episode's action sequence under `logits`."""
    total = 0.0
    for _, action, avail, probs in replay(episode, env, logits):
        total += math.log(probs[avail.index(action)])
    return total


def render_episode(episode: Episode) -> str:
    """Plain-text rendering whose format_check matches episode.format_ok."""
    return "".join(_RENDER[KIND_INDEX[t]] for t in episode.tokens)
