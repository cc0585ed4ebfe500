import pytest
from hypothesis import given, strategies as st

from formlen.rewards import (
    LengthObservation,
    LengthParams,
    RewardConfig,
    combined_format_length,
    format_reward,
    length_reward_polyline,
    length_reward_quadratic,
    linear_length_reward,
    score_response,
)
from formlen.grading import ResponseRecord


class TestFormatReward:
    def test_binary_values(self):
        assert format_reward(True) == 1.0
        assert format_reward(False) == 0.0

    def test_idempotent(self):
        assert format_reward(True) == format_reward(True)
        assert format_reward(False) == format_reward(False)


class TestQuadraticLengthReward:
    @pytest.mark.parametrize(
        "x,p,expected",
        [
            (0.0, 0.5, 0.0),
            (0.5, 0.5, 1.0),
            (1.0, 0.5, -1.0),
            (0.25, 0.5, 0.75),  # 1 - (1 - 0.25/0.5)^2
        ],
    )
    def test_known_values(self, x, p, expected):
        assert length_reward_quadratic(x, p) == pytest.approx(expected, abs=1e-12)

    def test_maximum_at_turning_point(self):
        for p in [0.1, 0.3, 0.5, 0.7, 0.9]:
            assert length_reward_quadratic(p, p) == 1.0

    def test_domain_rejection(self):
        with pytest.raises(ValueError):
            length_reward_quadratic(-0.1, 0.5)
        with pytest.raises(ValueError):
            length_reward_quadratic(1.1, 0.5)
        with pytest.raises(ValueError):
            length_reward_quadratic(0.5, 0.0)
        with pytest.raises(ValueError):
            length_reward_quadratic(0.5, 1.0)

    def test_strictly_monotone_around_turning_point(self):
        # increasing on [0,p), decreasing on (p,1], checked on a 1e3-point grid
        for p in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]:
            grid = [i / 1000 for i in range(1001)]
            lo = [x for x in grid if x < p]
            hi = [x for x in grid if x > p]
            vals_lo = [length_reward_quadratic(x, p) for x in lo]
            vals_hi = [length_reward_quadratic(x, p) for x in hi]
            assert all(a < b for a, b in zip(vals_lo, vals_lo[1:]))
            assert all(a > b for a, b in zip(vals_hi, vals_hi[1:]))

    def test_continuity_and_flat_derivative_at_turning_point(self):
        # both one-sided finite differences shrink toward 0 with h
        h = 1e-9
        for p in [round(0.1 * i, 1) for i in range(1, 10)]:
            f_p = length_reward_quadratic(p, p)
            left = (f_p - length_reward_quadratic(p - h, p)) / h
            right = (length_reward_quadratic(p + h, p) - f_p) / h
            assert abs(left) <= 1e-6
            assert abs(right) <= 1e-6
            gap = abs(length_reward_quadratic(p - h, p) - length_reward_quadratic(p + h, p))
            assert gap < 1e-12

    @given(st.floats(0.0, 1.0), st.floats(0.01, 0.99))
    def test_range_bounds(self, x, p):
        assert -1.0 <= length_reward_quadratic(x, p) <= 1.0


class TestPolylineLengthReward:
    @pytest.mark.parametrize(
        "x,p,expected",
        [
            (0.0, 0.5, 0.0),
            (0.5, 0.5, 1.0),
            (1.0, 0.5, -1.0),
            (0.75, 0.5, 0.0),  # 3 - 4*0.75
        ],
    )
    def test_known_values(self, x, p, expected):
        assert length_reward_polyline(x, p) == pytest.approx(expected, abs=1e-12)

    def test_first_branch_wins_at_joint(self):
        # branches disagree at p != 0.5; the implementation must return 2p
        for p in [0.2, 0.4, 0.6, 0.8]:
            assert length_reward_polyline(p, p) == 2.0 * p

    def test_continuous_at_default_joint(self):
        h = 1e-12
        assert abs(length_reward_polyline(0.5 - h, 0.5) - length_reward_polyline(0.5 + h, 0.5)) < 1e-9

    def test_domain_rejection(self):
        with pytest.raises(ValueError):
            length_reward_polyline(2.0, 0.5)
        with pytest.raises(ValueError):
            length_reward_polyline(0.5, 1.5)


class TestLinearLengthReward:
    def test_identity(self):
        assert linear_length_reward(0.0) == 0.0
        assert linear_length_reward(1.0) == 1.0
        assert linear_length_reward(0.3) == 0.3

    def test_domain_rejection(self):
        with pytest.raises(ValueError):
            linear_length_reward(-0.01)
        with pytest.raises(ValueError):
            linear_length_reward(1.01)


class TestCombinedFormatLength:
    @pytest.mark.parametrize(
        "format_ok,r_l,expected",
        [
            (True, 1.0, 2.0),
            (False, 1.0, 0.0),
            (False, -1.0, -1.0),
            (True, 0.0, 1.0),
        ],
    )
    def test_known_values(self, format_ok, r_l, expected):
        assert combined_format_length(format_ok, r_l).value == expected

    def test_components_recorded(self):
        score = combined_format_length(True, 0.25)
        assert score.format_component == 1.0
        assert score.length_component == 0.25
        assert score.value == 1.25

    def test_gating_grid(self):
        # exhaustive grid: a wrong format can never score above 0
        for i in range(-100, 101):
            r_l = i / 100
            assert combined_format_length(False, r_l).value <= 0.0

    @given(st.floats(-1.0, 1.0))
    def test_format_monotonicity(self, r_l):
        assert combined_format_length(True, r_l).value >= combined_format_length(False, r_l).value

    @given(st.floats(-1.0, 1.0))
    def test_valid_format_at_least_format_only(self, r_l):
        if r_l >= -1.0:
            assert combined_format_length(True, r_l).value >= format_reward(True) + -1.0


class TestLengthObservation:
    def test_clamps_overlong_to_one(self):
        obs = LengthObservation.from_length(5000, LengthParams(l_max=3072))
        assert obs.fraction == 1.0

    def test_clamp_disabled_rejects(self):
        with pytest.raises(ValueError):
            LengthObservation.from_length(5000, LengthParams(l_max=3072), clamp_overlong=False)

    def test_fraction(self):
        obs = LengthObservation.from_length(1536, LengthParams(l_max=3072))
        assert obs.fraction == 0.5


class TestScoreResponse:
    def _record(self, length=None):
        return ResponseRecord(id="r1", response="x", length=length)

    def test_quadratic_peak(self):
        config = RewardConfig(
            variant="format_length_quadratic", length_params=LengthParams(p=0.5, l_max=3072)
        )
        score = score_response(self._record(length=1536), config, format_ok=True)
        assert score.value == pytest.approx(2.0, abs=1e-12)

    def test_format_only_false(self):
        config = RewardConfig(variant="format_only")
        assert score_response(self._record(), config, format_ok=False).value == 0.0

    def test_correctness_true(self):
        config = RewardConfig(variant="correctness")
        assert score_response(self._record(), config, format_ok=True, correct=True).value == 1.0

    def test_correctness_requires_flag(self):
        config = RewardConfig(variant="correctness")
        with pytest.raises(ValueError, match="r1"):
            score_response(self._record(), config, format_ok=True, correct=None)

    def test_linear_length_with_bonus(self):
        config = RewardConfig(
            variant="linear_length", length_params=LengthParams(l_max=100)
        )
        score = score_response(self._record(length=30), config, format_ok=True, correct=True)
        assert score.value == pytest.approx(1.3)
        score = score_response(self._record(length=30), config, format_ok=True, correct=None)
        assert score.value == pytest.approx(0.3)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            RewardConfig(variant="nonsense")

    def test_pure(self):
        config = RewardConfig(variant="format_length_polyline")
        a = score_response(self._record(length=100), config, format_ok=True)
        b = score_response(self._record(length=100), config, format_ok=True)
        assert a == b
