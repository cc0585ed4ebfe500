# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot kernels: episode rollout and the
longest-repeated-substring search. Must stay bit-identical to _pure.py -
same splitmix64 stream, same float evaluation order, same exact integer
hash arithmetic."""

import sys

from libc.math cimport exp, log
from libc.stdint cimport int64_t, uint32_t, uint64_t
from libc.stdlib cimport free, malloc
from libc.string cimport memset

if sys.byteorder != "little":  # utf-32-le cast below assumes LE host
    raise ImportError("formlen._native requires a little-endian host")

cdef extern from *:
    """
    typedef unsigned __int128 fl_u128;
    static const unsigned long long FL_GOLDEN = 0x9E3779B97F4A7C15ULL;
    static const unsigned long long FL_MIX1   = 0xBF58476D1CE4E5B9ULL;
    static const unsigned long long FL_MIX2   = 0x94D049BB133111EBULL;
    """
    ctypedef unsigned long long fl_u128
    uint64_t FL_GOLDEN
    uint64_t FL_MIX1
    uint64_t FL_MIX2

cdef double INV_2_53 = 1.0 / 9007199254740992.0

# action / kind / phase encoding mirrored from _pure.py
cdef int A_STEP = 0
cdef int A_REFLECT = 1
cdef int A_OPEN = 2
cdef int A_ANSWER = 3
cdef int A_CLOSE = 4
cdef int A_EOS = 5
cdef int K_STEP = 0
cdef int K_REFLECT = 1
cdef int K_OPEN = 2
cdef int K_GOOD = 3
cdef int K_BAD = 4
cdef int K_CLOSE = 5
cdef int K_EOS = 6
cdef int N_PHASES = 4


cdef inline uint64_t _next_u64(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] = state[0] + FL_GOLDEN
    z = state[0]
    z = (z ^ (z >> 30)) * FL_MIX1
    z = (z ^ (z >> 27)) * FL_MIX2
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t* state) nogil:
    return <double>(_next_u64(state) >> 11) * INV_2_53


def rollout_kernel(
    const double[:, ::1] logits,
    double temperature,
    long l_max,
    const int64_t[::1] kind_costs,
    double odds_base,
    double odds_gain,
    double odds_cap,
    long max_segments,
    unsigned long long state_in,
    int64_t[::1] out_kinds,
):
    """Sample one episode; fills out_kinds[:count].

    Returns (count, logp, new_rng_state); see _pure.rollout_kernel.
    """
    cdef uint64_t state = state_in
    cdef long cost = 0, count = 0, n_think = 0
    cdef int phase = 0  # PHASE_BEFORE
    cdef double logp = 0.0
    cdef int avail[4]
    cdef double exps[4]
    cdef int navail, k, chosen, action, kind, bucket
    cdef long decile
    cdef double m, s, total, u, target, acc, p_good, g

    while cost < l_max and count < max_segments:
        decile = (10 * cost) / l_max
        bucket = <int>(decile * N_PHASES + phase)

        if phase == 0:
            avail[0] = A_STEP; avail[1] = A_REFLECT; avail[2] = A_OPEN; avail[3] = A_EOS
            navail = 4
        elif phase == 1:
            avail[0] = A_ANSWER; avail[1] = A_CLOSE; avail[2] = A_EOS
            navail = 3
        elif phase == 2:
            avail[0] = A_CLOSE; avail[1] = A_EOS
            navail = 2
        else:
            avail[0] = A_STEP; avail[1] = A_REFLECT; avail[2] = A_EOS
            navail = 3

        m = logits[bucket, avail[0]] / temperature
        for k in range(1, navail):
            s = logits[bucket, avail[k]] / temperature
            if s > m:
                m = s
        total = 0.0
        for k in range(navail):
            exps[k] = exp(logits[bucket, avail[k]] / temperature - m)
            total += exps[k]

        u = _uniform(&state)
        target = u * total
        acc = 0.0
        chosen = navail - 1
        for k in range(navail):
            acc += exps[k]
            if target < acc:
                chosen = k
                break
        action = avail[chosen]
        logp += log(exps[chosen] / total)

        if action == A_ANSWER:
            p_good = odds_base + odds_gain * n_think
            if p_good > odds_cap:
                p_good = odds_cap
            g = _uniform(&state)
            kind = K_GOOD if g < p_good else K_BAD
            phase = 2  # PHASE_ANSWERED
        elif action == A_STEP:
            kind = K_STEP
            n_think += 1
        elif action == A_REFLECT:
            kind = K_REFLECT
            n_think += 1
        elif action == A_OPEN:
            kind = K_OPEN
            phase = 1  # PHASE_IN_BOX
        elif action == A_CLOSE:
            kind = K_CLOSE
            phase = 3  # PHASE_DONE
        else:
            kind = K_EOS

        out_kinds[count] = kind
        cost += kind_costs[kind]
        count += 1
        if action == A_EOS:
            break

    return count, logp, state


cdef uint64_t HASH_MOD = 2305843009213693951ULL  # 2^61 - 1
cdef uint64_t HASH_BASE = 1000000007ULL % 2305843009213693951ULL


cdef inline uint64_t _mulmod(uint64_t a, uint64_t b) nogil:
    return <uint64_t>((<fl_u128>a * b) % HASH_MOD)


cdef inline bint _windows_equal(const uint32_t* codes, Py_ssize_t a, Py_ssize_t b,
                                Py_ssize_t k) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(k):
        if codes[a + j] != codes[b + j]:
            return False
    return True


cdef bint _has_repeat(const uint32_t* codes, Py_ssize_t n, Py_ssize_t k):
    """Rolling-hash position set: open addressing plus content verification,
    so hash collisions can never produce a false positive."""
    cdef uint64_t h = 0, top = 1, base_pow
    cdef Py_ssize_t i, idx, nwin = n - k + 1
    cdef bint found = False
    cdef Py_ssize_t cap = 4
    while cap < 2 * nwin:
        cap <<= 1
    cdef uint64_t mask = cap - 1
    cdef uint64_t* hashes = <uint64_t*>malloc(cap * sizeof(uint64_t))
    cdef Py_ssize_t* positions = <Py_ssize_t*>malloc(cap * sizeof(Py_ssize_t))
    if hashes == NULL or positions == NULL:
        free(hashes)
        free(positions)
        raise MemoryError()
    memset(positions, 0xFF, cap * sizeof(Py_ssize_t))  # all slots -1 (empty)
    try:
        for i in range(k):
            h = (_mulmod(h, HASH_BASE) + codes[i]) % HASH_MOD
        # top = BASE^(k-1) mod M
        base_pow = HASH_BASE
        i = k - 1
        while i > 0:
            if i & 1:
                top = _mulmod(top, base_pow)
            base_pow = _mulmod(base_pow, base_pow)
            i >>= 1

        for i in range(nwin):
            if i > 0:
                h = (h + HASH_MOD - _mulmod(codes[i - 1], top)) % HASH_MOD
                h = (_mulmod(h, HASH_BASE) + codes[i + k - 1]) % HASH_MOD
            idx = <Py_ssize_t>(h & mask)
            while positions[idx] != -1:
                if hashes[idx] == h and _windows_equal(codes, positions[idx], i, k):
                    found = True
                    break
                idx = <Py_ssize_t>((idx + 1) & mask)
            if found:
                break
            hashes[idx] = h
            positions[idx] = i
        return found
    finally:
        free(hashes)
        free(positions)


def repeated_substring_len(text: str) -> int:
    """Length of the longest substring occurring at least twice (overlap ok)."""
    cdef Py_ssize_t n = len(text)
    if n < 2:
        return 0
    raw = text.encode("utf-32-le")
    cdef const unsigned char[::1] buf = raw
    cdef const uint32_t* codes = <const uint32_t*>&buf[0]
    cdef Py_ssize_t lo = 1, hi = n - 1, mid, best = 0
    while lo <= hi:
        mid = (lo + hi) // 2
        if _has_repeat(codes, n, mid):
            best = mid
            lo = mid + 1
        else:
            hi = mid - 1
    return best
