"""Pure-Python implementations of the hot kernels.

Mirror images of the compiled versions in _native.pyx: the simulator's
episode rollout and the longest-repeated-substring search. Both backends
must produce bit-identical results - the rollout uses an integer splitmix64
stream and a fixed float evaluation order, the substring search is exact
integer work - so the public API can pick whichever is importable.
"""

from __future__ import annotations

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0

# Simulator vocabulary. Token kinds are what an episode records; actions are
# what the policy chooses (GOOD/BAD answers are resolved by the environment,
# so a single ANSWER action covers both kinds).
K_STEP, K_REFLECT, K_OPEN, K_GOOD, K_BAD, K_CLOSE, K_EOS = range(7)
A_STEP, A_REFLECT, A_OPEN, A_ANSWER, A_CLOSE, A_EOS = range(6)

# Box-building phases and the actions available in each.
PHASE_BEFORE, PHASE_IN_BOX, PHASE_ANSWERED, PHASE_DONE = range(4)
PHASE_ACTIONS = (
    (A_STEP, A_REFLECT, A_OPEN, A_EOS),
    (A_ANSWER, A_CLOSE, A_EOS),
    (A_CLOSE, A_EOS),
    (A_STEP, A_REFLECT, A_EOS),
)
N_PHASES = 4
N_DECILES = 10
N_BUCKETS = N_DECILES * N_PHASES
N_ACTIONS = 6


def splitmix64_next(state: int) -> tuple[int, int]:
    """Advance the splitmix64 stream; returns (new_state, 64-bit output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def uniform(state: int) -> tuple[int, float]:
    """One draw in [0, 1) from 53 random bits."""
    state, z = splitmix64_next(state)
    return state, (z >> 11) * _INV_2_53


def rollout_kernel(
    logits,  # (N_BUCKETS, N_ACTIONS) float64, C-contiguous
    temperature: float,
    l_max: int,
    kind_costs,  # int64 array of length 7
    odds_base: float,
    odds_gain: float,
    odds_cap: float,
    max_segments: int,
    state: int,
    out_kinds,  # int64 array, length >= max_segments
) -> tuple[int, float, int]:
    """Sample one episode; fills out_kinds[:count].

    Returns (count, logp, new_rng_state). The policy walks phase-masked
    softmax distributions over the (cost-decile, phase) bucket's logits;
    when it picks ANSWER, the environment draws GOOD vs BAD with probability
    min(odds_cap, odds_base + odds_gain * reasoning_tokens_so_far).
    """
    cost = 0
    phase = PHASE_BEFORE
    n_think = 0
    logp = 0.0
    count = 0
    kinds = []

    while cost < l_max and count < max_segments:
        decile = (10 * cost) // l_max
        bucket = decile * N_PHASES + phase
        avail = PHASE_ACTIONS[phase]

        m = logits[bucket, avail[0]] / temperature
        for a in avail[1:]:
            s = logits[bucket, a] / temperature
            if s > m:
                m = s
        exps = []
        total = 0.0
        for a in avail:
            e = math.exp(logits[bucket, a] / temperature - m)
            exps.append(e)
            total += e

        state, u = uniform(state)
        target = u * total
        acc = 0.0
        chosen = len(avail) - 1
        for k in range(len(avail)):
            acc += exps[k]
            if target < acc:
                chosen = k
                break
        action = avail[chosen]
        logp += math.log(exps[chosen] / total)

        if action == A_ANSWER:
            p_good = odds_base + odds_gain * n_think
            if p_good > odds_cap:
                p_good = odds_cap
            state, g = uniform(state)
            kind = K_GOOD if g < p_good else K_BAD
            phase = PHASE_ANSWERED
        elif action == A_STEP:
            kind = K_STEP
            n_think += 1
        elif action == A_REFLECT:
            kind = K_REFLECT
            n_think += 1
        elif action == A_OPEN:
            kind = K_OPEN
            phase = PHASE_IN_BOX
        elif action == A_CLOSE:
            kind = K_CLOSE
            phase = PHASE_DONE
        else:
            kind = K_EOS

        kinds.append(kind)
        cost += int(kind_costs[kind])
        count += 1
        if action == A_EOS:
            break

    out_kinds[:count] = kinds
    return count, logp, state


_HASH_MOD = (1 << 61) - 1
_HASH_BASE = 1_000_000_007 % _HASH_MOD


def _has_repeat(text: str, k: int) -> bool:
    """Any substring of length k occurring at >= 2 (possibly overlapping) spots?"""
    n = len(text)
    h = 0
    for i in range(k):
        h = (h * _HASH_BASE + ord(text[i])) % _HASH_MOD
    top = pow(_HASH_BASE, k - 1, _HASH_MOD)
    seen: dict[int, list[int]] = {h: [0]}
    for i in range(1, n - k + 1):
        h = ((h - ord(text[i - 1]) * top) * _HASH_BASE + ord(text[i + k - 1])) % _HASH_MOD
        positions = seen.get(h)
        if positions is None:
            seen[h] = [i]
            continue
        window = text[i : i + k]
        for j in positions:
            if text[j : j + k] == window:
                return True
        positions.append(i)
    return False


def repeated_substring_len(text: str) -> int:
    """Length of the longest substring occurring at least twice (overlap ok)."""
    n = len(text)
    if n < 2:
        return 0
    best = 0
    lo, hi = 1, n - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        if _has_repeat(text, mid):
            best = mid
            lo = mid + 1
        else:
            hi = mid - 1
    return best
