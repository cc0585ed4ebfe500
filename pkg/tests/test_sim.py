import dataclasses
import statistics
from fractions import Fraction

import numpy as np
import pytest

from formlen._pure import (
    A_ANSWER,
    A_CLOSE,
    A_EOS,
    A_OPEN,
    N_ACTIONS,
    N_BUCKETS,
    PHASE_ACTIONS,
)
from formlen.boxed import format_check
from formlen.rewards import RewardConfig, LengthParams
from formlen.simenv import (
    EnvConfig,
    Episode,
    PolicyParams,
    Rng,
    initial_policy,
    render_episode,
    rollout,
    sample_group,
)
from formlen.training import SimConfig, grpo_step, run_training, score_episode


def forced_policy(*bumps, base=0.0):
    """Policy with +50 logit bumps on (phase, action) pairs in every decile."""
    logits = np.full((N_BUCKETS, N_ACTIONS), base, dtype=np.float64)
    for phase, action in bumps:
        for decile in range(10):
            logits[decile * 4 + phase, action] = 50.0
    return PolicyParams(logits=logits)


class TestRollout:
    def test_forced_path_minimal_format_episode(self):
        policy = forced_policy((0, A_OPEN), (1, A_ANSWER), (2, A_CLOSE), (3, A_EOS))
        env = EnvConfig(odds_base=1.0, odds_cap=1.0)
        episode = rollout(policy, env, Rng(0))
        assert episode.format_ok
        assert episode.correct
        assert not episode.truncated
        assert episode.tokens == ("OPEN_BOX", "GOOD_ANSWER", "CLOSE_BOX", "EOS")
        assert episode.length == 3

    def test_same_seed_identical_episode(self):
        policy = initial_policy()
        env = EnvConfig()
        a = rollout(policy, env, Rng(42))
        b = rollout(policy, env, Rng(42))
        assert a == b

    def test_truncation_mid_box_breaks_format(self):
        # pad to the cap, then open a box that cannot finish
        policy = forced_policy((0, A_OPEN), (1, A_ANSWER))
        env = EnvConfig(l_max=2, odds_base=1.0, odds_cap=1.0)
        episode = rollout(policy, env, Rng(1))
        assert episode.truncated
        assert not episode.format_ok

    def test_length_is_cost_sum(self):
        policy = initial_policy()
        env = EnvConfig()
        costs = {
            "STEP": 4, "REFLECT": 3, "OPEN_BOX": 1, "GOOD_ANSWER": 1,
            "BAD_ANSWER": 1, "CLOSE_BOX": 1, "EOS": 0,
        }
        for seed in range(20):
            episode = rollout(policy, env, Rng(seed))
            assert episode.length == sum(costs[t] for t in episode.tokens)
            assert episode.truncated == (episode.length >= env.l_max or episode.tokens[-1] != "EOS")

    def test_truncation_probability_matches_enumeration(self):
        # uniform policy, tiny context: compare the Monte Carlo truncation
        # frequency against exact enumeration of the decision tree
        env = EnvConfig(
            l_max=3, cost_step=1, cost_reflect=1, cost_open=1,
            cost_answer=1, cost_close=1, cost_eos=0,
        )
        uniform = PolicyParams(logits=np.zeros((N_BUCKETS, N_ACTIONS)))

        def exact_truncation_prob(cost, phase) -> Fraction:
            if cost >= env.l_max:
                return Fraction(1)
            avail = PHASE_ACTIONS[phase]
            total = Fraction(0)
            for action in avail:
                if action == A_EOS:
                    continue  # terminates untruncated
                if action == A_OPEN:
                    nxt = 1
                elif action == A_ANSWER:
                    nxt = 2
                elif action == A_CLOSE:
                    nxt = 3
                else:
                    nxt = phase
                total += exact_truncation_prob(cost + 1, nxt)
            return total / len(avail)

        expected = float(exact_truncation_prob(0, 0))
        n = 20000
        rng = Rng(9)
        hits = sum(rollout(uniform, env, rng).truncated for _ in range(n))
        assert hits / n == pytest.approx(expected, abs=0.02)

    def test_render_matches_format_check(self):
        # environment-format flag must agree with the text validator on the
        # rendered episode, across varied (including adversarial) policies
        policies = [
            initial_policy(),
            PolicyParams(logits=np.zeros((N_BUCKETS, N_ACTIONS))),
            forced_policy((0, A_OPEN), (1, A_CLOSE)),           # empty boxes
            forced_policy((0, A_OPEN), (1, A_ANSWER), (2, A_EOS)),  # unclosed boxes
            forced_policy((0, A_EOS)),                          # instant EOS
            forced_policy((0, A_OPEN), (1, A_ANSWER), (2, A_CLOSE), (3, A_EOS)),
        ]
        env = EnvConfig()
        rng = Rng(3)
        for policy in policies:
            for _ in range(40):
                episode = rollout(policy, env, rng)
                assert format_check(render_episode(episode)) == episode.format_ok, episode.tokens

    def test_correct_implies_format_and_good_answer(self):
        env = EnvConfig()
        rng = Rng(11)
        policy = initial_policy()
        for _ in range(200):
            episode = rollout(policy, env, rng)
            if episode.correct:
                assert episode.format_ok
                assert "GOOD_ANSWER" in episode.tokens


class TestSampleGroup:
    def test_group_size(self):
        group = sample_group(initial_policy(), EnvConfig(), 8, Rng(0))
        assert len(group) == 8

    def test_deterministic_forced_policy_identical(self):
        policy = forced_policy((0, A_OPEN), (1, A_ANSWER), (2, A_CLOSE), (3, A_EOS))
        env = EnvConfig(odds_base=1.0, odds_cap=1.0)
        group = sample_group(policy, env, 2, Rng(0))
        assert group[0] == group[1]

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            sample_group(initial_policy(), EnvConfig(), 1, Rng(0))


class TestGrpoStep:
    def test_all_equal_rewards_leave_policy_unchanged(self):
        policy = forced_policy((0, A_OPEN), (1, A_ANSWER), (2, A_CLOSE), (3, A_EOS))
        env = EnvConfig(odds_base=1.0, odds_cap=1.0)
        group = sample_group(policy, env, 4, Rng(0))
        cfg = SimConfig(variant="format_only", env=env)
        updated, info = grpo_step(policy, env, group, cfg.reward_config(), cfg.clip_params())
        assert np.array_equal(updated.logits, policy.logits)
        assert info.clip_activations == 0

    def test_format_gradient_sign(self):
        # mixed group under format_only: logits toward the successful box
        # path strictly increase in the visited buckets
        env = EnvConfig()
        policy = initial_policy()
        rng = Rng(2)
        cfg = SimConfig(variant="format_only", env=env)
        for _ in range(50):
            group = sample_group(policy, env, 8, rng)
            if any(ep.format_ok for ep in group) and not all(ep.format_ok for ep in group):
                break
        else:
            pytest.fail("no mixed group found")
        updated, _ = grpo_step(policy, env, group, cfg.reward_config(), cfg.clip_params())
        winner = next(ep for ep in group if ep.format_ok)
        # the OPEN_BOX decision of the successful episode got reinforced
        from formlen.simenv import replay

        opened_buckets = [
            bucket for bucket, action, _, _ in replay(winner, env, policy.logits)
            if action == A_OPEN
        ]
        for bucket in opened_buckets:
            assert updated.logits[bucket, A_OPEN] > policy.logits[bucket, A_OPEN]

    def test_on_policy_ratio_and_zero_activations(self):
        env = EnvConfig()
        policy = initial_policy()
        group = sample_group(policy, env, 8, Rng(0))
        cfg = SimConfig(env=env)
        _, info = grpo_step(policy, env, group, cfg.reward_config(), cfg.clip_params())
        assert info.ratio_max_deviation == 0.0
        assert info.clip_activations == 0

    def test_stale_policy_mode_activates_clipping(self):
        result = run_training(
            SimConfig(steps=60, seed=0, stale_policy=True, epsilon=0.05)
        )
        assert result.clip_activations > 0
        assert result.ratio_max_deviation > 0.0

    def test_kl_pull_toward_reference(self):
        # a moderate KL coefficient keeps the policy nearer the reference
        # (the estimator's gradient is exponential in the log-prob gap, so
        # very large coefficients destabilize rather than pin)
        free = run_training(SimConfig(steps=100, seed=0, kl_coeff=0.0))
        tied = run_training(SimConfig(steps=100, seed=0, kl_coeff=0.2))
        ref = initial_policy().logits
        drift_free = float(np.abs(free.policy.logits - ref).max())
        drift_tied = float(np.abs(tied.policy.logits - ref).max())
        assert drift_tied < drift_free


class TestRunTraining:
    def test_deterministic_trace(self):
        cfg = SimConfig(steps=40, seed=5)
        a = run_training(cfg)
        b = run_training(cfg)
        assert a.trace == b.trace

    def test_seed_changes_trace(self):
        a = run_training(SimConfig(steps=40, seed=0))
        b = run_training(SimConfig(steps=40, seed=1))
        assert a.trace != b.trace

    def test_step_indices_contiguous_from_one(self):
        result = run_training(SimConfig(steps=25, seed=0))
        assert [t.step for t in result.trace] == list(range(1, 26))

    def test_clipping_toggle_is_inert_on_policy(self):
        cfg = SimConfig(steps=80, seed=3, clipping_enabled=True)
        off = dataclasses.replace(cfg, clipping_enabled=False)
        assert run_training(cfg).trace == run_training(off).trace

    def test_reward_window_averages_improve(self):
        # format-length reward: non-overlapping 50-step reward means are
        # nondecreasing, allowing at most one violating window per run
        for seed in [0, 1, 2]:
            result = run_training(SimConfig(steps=300, seed=seed))
            rewards = [t.mean_reward for t in result.trace]
            windows = [statistics.mean(rewards[i : i + 50]) for i in range(0, 300, 50)]
            violations = sum(1 for a, b in zip(windows, windows[1:]) if b < a)
            assert violations <= 1

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(steps=0)
        with pytest.raises(ValueError):
            SimConfig(group_size=1)
        with pytest.raises(ValueError):
            SimConfig(variant="bogus")
        with pytest.raises(ValueError):
            SimConfig(p=1.0)


class TestScoreEpisode:
    def test_quadratic_peak_episode(self):
        env = EnvConfig(l_max=64)
        episode = Episode(
            tokens=("OPEN_BOX", "GOOD_ANSWER", "CLOSE_BOX", "EOS"),
            length=32, format_ok=True, correct=True, truncated=False, logp=-1.0,
        )
        cfg = RewardConfig(
            variant="format_length_quadratic", length_params=LengthParams(p=0.5, l_max=64)
        )
        assert score_episode(episode, cfg).value == pytest.approx(2.0)
