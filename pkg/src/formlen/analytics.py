"""Response-log and training-trace measurements.

Covers the instruments used to study training behavior: repetition via the
longest-repeated-substring ratio, reflective-keyword frequencies, truncation
rates, and a detector for the length curve's down-then-up shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import backend

DEFAULT_LEXICON_CATEGORIES: dict[str, list[str]] = {
    "verification": ["wait", "verify", "check"],
    "retrospection": ["recall", "recheck"],
    "branch_exploration": ["alternatively"],
    "logical_turn": ["however", "but", "since"],
    "decomposition": ["step", "step-by-step"],
}


@dataclass(frozen=True)
class KeywordLexicon:
    """Named categories of reflective keywords."""

    categories: Mapping[str, Sequence[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in DEFAULT_LEXICON_CATEGORIES.items()}
    )

    def __post_init__(self):
        if not self.categories:
            raise ValueError("lexicon needs at least one category")
        for name, words in self.categories.items():
            if not words:
                raise ValueError(f"lexicon category {name!r} has no keywords")


def longest_repeated_substring_ratio(text: str) -> float:
    """Longest substring occurring at >= 2 (possibly overlapping) positions,
    as a fraction of the text length. Empty text gives 0."""
    if not text:
        return 0.0
    return backend.repeated_substring_len(text) / len(text)


def reflective_keyword_counts(text: str, lexicon: KeywordLexicon | None = None) -> dict[str, int]:
    """Case-insensitive whole-word keyword counts per category.

    Longer keywords claim their character span first, so the two "step"
    words inside one "step-by-step" are not double counted; "step by step"
    with spaces still counts as two separate "step" hits.
    """
    if lexicon is None:
        lexicon = KeywordLexicon()
    counts = {name: 0 for name in lexicon.categories}
    if not text:
        return counts

    entries = [
        (word, name)
        for name, words in lexicon.categories.items()
        for word in words
    ]
    entries.sort(key=lambda e: (-len(e[0]), e[1], e[0]))

    claimed: list[tuple[int, int]] = []
    for word, category in entries:
        pattern = re.compile(r"\b" + re.escape(word) + r"\b", re.IGNORECASE | re.UNICODE)
        for m in pattern.finditer(text):
            span = (m.start(), m.end())
            if any(span[0] < c_end and c_start < span[1] for c_start, c_end in claimed):
                continue
            claimed.append(span)
            counts[category] += 1
    return counts


def truncation_rate(records: Sequence, l_max: int) -> float:
    """Fraction of records whose length reached the context cap."""
    if not records:
        raise ValueError("truncation rate over zero records is undefined")
    if l_max < 1:
        raise ValueError(f"l_max must be >= 1, got {l_max}")
    truncated = 0
    for record in records:
        if record.length is None:
            raise ValueError(f"record {record.id!r} has no length")
        if record.length >= l_max:
            truncated += 1
    return truncated / len(records)


@dataclass(frozen=True)
class DualPhaseReport:
    """Shape summary of a smoothed mean-length curve."""

    min_step: int
    decreased: bool
    recovered: bool


def moving_average(values: Sequence[float], window: int) -> list[float]:
    """Trailing moving average; entry i covers steps i-window+1 .. i."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        if i >= window - 1:
            out.append(acc / window)
    return out


def dual_phase_detect(trace, window: int = 5, threshold: float = 0.05) -> DualPhaseReport:
    """Detect the decrease-then-recover shape in a mean-length series.

    `trace` is either a sequence of per-step mean lengths or of objects with
    a mean_length attribute (a TrainingTrace). The series is smoothed with a
    trailing moving average; `decreased` means the smoothed start-to-minimum
    drop exceeds the threshold fraction, `recovered` the minimum-to-end rise.
    """
    lengths = [
        float(getattr(entry, "mean_length", entry)) for entry in trace
    ]
    if len(lengths) < 2 * window:
        raise ValueError(
            f"trace too short: {len(lengths)} steps, need at least {2 * window}"
        )
    smoothed = moving_average(lengths, window)
    min_idx = min(range(len(smoothed)), key=lambda i: smoothed[i])
    s_start, s_min, s_end = smoothed[0], smoothed[min_idx], smoothed[-1]
    decreased = s_start > 0 and (s_start - s_min) / s_start > threshold
    recovered = s_min > 0 and (s_end - s_min) / s_min > threshold
    # window-1 leading steps have no smoothed value; report 1-based step index
    return DualPhaseReport(min_step=min_idx + window, decreased=decreased, recovered=recovered)
