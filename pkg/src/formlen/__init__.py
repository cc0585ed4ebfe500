"""formlen: format/length surrogate rewards for label-free RL experiments.

Library surface:
  rewards    - format, length, and gated format-length reward functions
  boxed      - \\boxed{} extraction and math-content validation
  grading    - answer normalization, exact-match correctness, pass@N
  rlmath     - GRPO advantages, PPO clipped surrogate, GAE, TD loss, KL
  simenv     - segment-token environment and tabular softmax policy
  training   - GRPO training loop producing per-step traces
  analytics  - repetition, reflective keywords, truncation, length curves
  backend    - compiled/pure kernel selection (FORMLEN_PURE=1 forces pure)
  cli        - the `formlen` command line tool
"""

from .analytics import (
    KeywordLexicon,
    dual_phase_detect,
    longest_repeated_substring_ratio,
    reflective_keyword_counts,
    truncation_rate,
)
from .backend import backend_name
from .boxed import BoxedExtraction, ValidationVerdict, extract_boxed, format_check, validate_math_expression
from .grading import CanonicalAnswer, ResponseRecord, correctness_reward, normalize_answer, pass_at_n
from .rewards import (
    LengthParams,
    RewardConfig,
    RewardScore,
    combined_format_length,
    format_reward,
    length_reward_polyline,
    length_reward_quadratic,
    linear_length_reward,
    score_response,
)
from .rlmath import (
    ClipParams,
    GroupSample,
    Trajectory,
    clipped_surrogate,
    gae,
    group_advantages,
    kl_penalty,
    prob_ratio,
    td_value_loss,
)
from .simenv import EnvConfig, Episode, PolicyParams, Rng, initial_policy, rollout, sample_group
from .training import SimConfig, SimResult, StepStats, grpo_step, run_training

__version__ = "0.1.0"
