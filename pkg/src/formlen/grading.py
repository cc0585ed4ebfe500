r"""Answer normalization, exact-match correctness, and pass@N aggregation.

Normalization is deliberately minimal: strip and collapse whitespace, drop
\left/\right sizing commands, rewrite \frac{a}{b} (and \dfrac/\tfrac) to
a/b, then attempt an exact rational parse. Numeric answers compare as exact
fractions (so \frac{3}{2} matches 1.5); everything else compares as the
normalized string. No symbolic algebra is attempted: forms that differ
algebraically compare unequal by design.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .boxed import extract_boxed


@dataclass
class ResponseRecord:
    """One model response, optionally with ground truth and a token length."""

    id: str
    response: str
    prompt: str = ""
    ground_truth: str | None = None
    length: int | None = None
    tag: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be nonempty")
        if self.length is not None and self.length < 0:
            raise ValueError(f"record {self.id!r}: length must be nonnegative")


@dataclass(frozen=True)
class CanonicalAnswer:
    """Normalized answer text plus its exact rational value when parseable."""

    text: str
    numeric: Fraction | None = None


_LEFT_RIGHT_RE = re.compile(r"\\left(?![A-Za-z])|\\right(?![A-Za-z])")
_INT_RE = re.compile(r"^[+-]?\d+$")
_DECIMAL_RE = re.compile(r"^[+-]?(?:\d+\.\d+|\.\d+)$")
_SIMPLE_FRACTION_RE = re.compile(r"^([+-]?\d+)\s*/\s*([+-]?\d+)$")
_FRAC_COMMANDS = (r"\dfrac", r"\tfrac", r"\frac")


def _read_brace_group(text: str, pos: int) -> tuple[str, int] | None:
    """Parse one {...} group starting at pos; returns (inner, end_after_brace)."""
    if pos >= len(text) or text[pos] != "{":
        return None
    depth = 1
    for i in range(pos + 1, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[pos + 1 : i], i + 1
    return None


def _rewrite_fractions(text: str) -> str:
    for cmd in _FRAC_COMMANDS:
        pos = 0
        while True:
            idx = text.find(cmd + "{", pos)
            if idx == -1:
                break
            first = _read_brace_group(text, idx + len(cmd))
            if first is None:
                pos = idx + len(cmd)
                continue
            num, after_num = first
            second = _read_brace_group(text, after_num)
            if second is None:
                pos = idx + len(cmd)
                continue
            den, after_den = second
            replacement = f"{_rewrite_fractions(num)}/{_rewrite_fractions(den)}"
            text = text[:idx] + replacement + text[after_den:]
            pos = idx + len(replacement)
    return text


def _parse_rational(text: str) -> Fraction | None:
    if _INT_RE.match(text) or _DECIMAL_RE.match(text):
        try:
            return Fraction(text)
        except ValueError:
            return None
    m = _SIMPLE_FRACTION_RE.match(text)
    if m:
        num, den = int(m.group(1)), int(m.group(2))
        if den != 0:
            return Fraction(num, den)
    return None


def normalize_answer(raw: str) -> CanonicalAnswer:
    """Canonicalize a boxed answer string; idempotent."""
    text = raw.strip()
    text = _LEFT_RIGHT_RE.sub("", text)
    text = re.sub(r"\s+", " ", text).strip()
    text = _rewrite_fractions(text)
    return CanonicalAnswer(text=text, numeric=_parse_rational(text))


def answers_match(a: CanonicalAnswer, b: CanonicalAnswer) -> bool:
    if a.numeric is not None and b.numeric is not None:
        return a.numeric == b.numeric
    return a.text == b.text


def correctness_reward(record: ResponseRecord) -> float:
    """Exact-match reward: 1 iff the last boxed answer equals the ground truth."""
    if record.ground_truth is None:
        raise ValueError(f"record {record.id!r}: correctness reward requires ground_truth")
    balanced = [e for e in extract_boxed(record.response) if e.balanced]
    if not balanced:
        return 0.0
    answer = normalize_answer(balanced[-1].content)
    truth = normalize_answer(record.ground_truth)
    return 1.0 if answers_match(answer, truth) else 0.0


def pass_at_n(outcomes: Mapping[str, Sequence[bool]], n: int) -> float:
    """Fraction of prompts whose first n outcomes contain at least one success."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not outcomes:
        raise ValueError("pass@N over an empty outcome set is undefined")
    hits = 0
    for prompt, results in outcomes.items():
        if len(results) < n:
            raise ValueError(
                f"prompt {prompt!r} has only {len(results)} outcomes, need at least {n}"
            )
        if any(results[:n]):
            hits += 1
    return hits / len(outcomes)
