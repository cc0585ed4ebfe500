import random

import pytest
from hypothesis import given, strategies as st

from formlen.analytics import (
    DEFAULT_LEXICON_CATEGORIES,
    KeywordLexicon,
    dual_phase_detect,
    longest_repeated_substring_ratio,
    moving_average,
    reflective_keyword_counts,
    truncation_rate,
)
from formlen.grading import ResponseRecord


def brute_force_repeated_len(text: str) -> int:
    """O(n^3) oracle: check every length for a duplicated substring."""
    n = len(text)
    best = 0
    for k in range(1, n):
        seen = set()
        for i in range(n - k + 1):
            sub = text[i : i + k]
            if sub in seen:
                best = max(best, k)
                break
            seen.add(sub)
    return best


class TestRepeatedSubstringRatio:
    @pytest.mark.parametrize(
        "text,expected",
        [("abcd", 0.0), ("abab", 0.5), ("aaaa", 0.75), ("", 0.0), ("a", 0.0)],
    )
    def test_known_values(self, text, expected):
        assert longest_repeated_substring_ratio(text) == expected

    def test_matches_brute_force_on_random_strings(self):
        rng = random.Random(99)
        for alphabet in ["ab", "abcdefghijklmnopqrstuvwxyz"]:
            for _ in range(100):
                n = rng.randint(0, 64)
                text = "".join(rng.choice(alphabet) for _ in range(n))
                expected = brute_force_repeated_len(text)
                got = longest_repeated_substring_ratio(text)
                assert got == (expected / n if n else 0.0), repr(text)

    def test_overlapping_occurrences_count(self):
        # "aaa" occurs at positions 0 and 1 of "aaaa"
        assert longest_repeated_substring_ratio("aaaa") == 0.75

    def test_disjoint_suffix_never_increases_numerator(self):
        rng = random.Random(5)
        for _ in range(50):
            base = "".join(rng.choice("ab") for _ in range(rng.randint(2, 24)))
            k = brute_force_repeated_len(base)
            # append characters the base never uses: no new repeats possible
            extended = base + "0123456789"[: rng.randint(1, 10)]
            assert brute_force_repeated_len(extended) == k

    def test_unicode_text(self):
        assert longest_repeated_substring_ratio("αβαβ") == 0.5


class TestReflectiveKeywordCounts:
    def test_default_lexicon_is_exact(self):
        lexicon = KeywordLexicon()
        assert dict(lexicon.categories) == {
            "verification": ["wait", "verify", "check"],
            "retrospection": ["recall", "recheck"],
            "branch_exploration": ["alternatively"],
            "logical_turn": ["however", "but", "since"],
            "decomposition": ["step", "step-by-step"],
        }
        assert dict(lexicon.categories) == DEFAULT_LEXICON_CATEGORIES

    def test_verification_hand_count(self):
        counts = reflective_keyword_counts("Wait, let me check.")
        assert counts["verification"] == 2

    def test_spaced_step_by_step_counts_twice(self):
        counts = reflective_keyword_counts("Let's solve it step by step again.")
        assert counts["decomposition"] == 2

    def test_hyphenated_unit_counts_once(self):
        counts = reflective_keyword_counts("a step-by-step plan")
        assert counts["decomposition"] == 1

    def test_empty_text(self):
        counts = reflective_keyword_counts("")
        assert counts == {name: 0 for name in DEFAULT_LEXICON_CATEGORIES}

    def test_whole_word_only(self):
        # "rechecking" contains neither a whole-word "recheck" nor "check"
        counts = reflective_keyword_counts("rechecking butter steps")
        assert counts["retrospection"] == 0
        assert counts["verification"] == 0
        assert counts["logical_turn"] == 0  # "butter" is not "but"
        assert counts["decomposition"] == 0  # "steps" is not "step"

    def test_recheck_does_not_double_count_check(self):
        counts = reflective_keyword_counts("recheck the result")
        assert counts["retrospection"] == 1
        assert counts["verification"] == 0

    def test_case_insensitive(self):
        lower = reflective_keyword_counts("wait, however, alternatively, recall, step")
        upper = reflective_keyword_counts("WAIT, However, ALTERNATIVELY, Recall, STEP")
        assert lower == upper

    @given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz .,", max_size=120))
    def test_case_invariance_property(self, text):
        flipped = "".join(c.upper() if i % 2 else c for i, c in enumerate(text))
        assert reflective_keyword_counts(text) == reflective_keyword_counts(flipped)

    def test_custom_lexicon(self):
        lexicon = KeywordLexicon(categories={"greeting": ["hello", "hi"]})
        counts = reflective_keyword_counts("hello and hi and hello", lexicon)
        assert counts == {"greeting": 3}


class TestTruncationRate:
    def _records(self, lengths):
        return [
            ResponseRecord(id=f"r{i}", response="x", length=n)
            for i, n in enumerate(lengths)
        ]

    def test_none_truncated(self):
        assert truncation_rate(self._records([10, 20, 30]), 100) == 0.0

    def test_half(self):
        assert truncation_rate(self._records([3072, 100]), 3072) == 0.5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            truncation_rate([], 100)

    def test_missing_length_rejected(self):
        records = [ResponseRecord(id="has-none", response="x")]
        with pytest.raises(ValueError, match="has-none"):
            truncation_rate(records, 100)

    def test_permutation_invariant(self):
        records = self._records([5, 100, 64, 3])
        rate = truncation_rate(records, 64)
        assert truncation_rate(list(reversed(records)), 64) == rate


class TestDualPhaseDetect:
    def test_v_shape(self):
        down = [100 - i for i in range(51)]  # 100 -> 50
        up = [50 + 0.6 * i for i in range(1, 51)]  # 50 -> 80
        report = dual_phase_detect(down + up, window=5)
        assert report.decreased
        assert report.recovered
        assert 48 <= report.min_step <= 55

    def test_monotone_decreasing(self):
        report = dual_phase_detect([100 - i for i in range(60)], window=5)
        assert report.decreased
        assert not report.recovered

    def test_constant(self):
        report = dual_phase_detect([42.0] * 30, window=5)
        assert not report.decreased
        assert not report.recovered

    def test_too_short_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            dual_phase_detect([1.0] * 9, window=5)

    def test_accepts_trace_objects(self):
        from formlen.training import StepStats

        trace = [
            StepStats(step=i + 1, mean_length=v, format_rate=0, mean_reward=0,
                      truncation_rate=0, reflect_rate=0)
            for i, v in enumerate([100 - i for i in range(51)] + [50 + i for i in range(1, 51)])
        ]
        report = dual_phase_detect(trace, window=5)
        assert report.decreased and report.recovered


class TestMovingAverage:
    def test_window_one_is_identity(self):
        assert moving_average([1.0, 2.0, 3.0], 1) == [1.0, 2.0, 3.0]

    def test_simple(self):
        assert moving_average([1.0, 2.0, 3.0, 4.0], 2) == [1.5, 2.5, 3.5]
