"""Benchmark the compiled kernels against the pure-Python fallback.

Run as `python -m formlen.bench`. Times the two hot kernels - the
longest-repeated-substring search and a full training simulation - under
both backends and checks that results agree exactly.
"""

from __future__ import annotations

import argparse
import random
import time

from . import _pure, backend
from .training import SimConfig, run_training


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _bench_substring(native, sizes, repeats):
    rng = random.Random(12345)
    rows = []
    for size in sizes:
        text = "".join(rng.choice("abcdefgh") for _ in range(size))
        pure_result = _pure.repeated_substring_len(text)
        t_pure = _time(lambda: _pure.repeated_substring_len(text), repeats)
        if native is not None:
            native_result = native.repeated_substring_len(text)
            assert native_result == pure_result, (
                f"backend mismatch at size {size}: native {native_result} != pure {pure_result}"
            )
            t_native = _time(lambda: native.repeated_substring_len(text), repeats)
        else:
            t_native = None
        rows.append((f"repeated_substring n={size}", t_pure, t_native))
    return rows


def _run_sim(kernel_rollout, cfg: SimConfig):
    # swap the backend-selected rollout for a specific implementation
    original = backend._impl
    try:
        backend._impl = kernel_rollout
        return run_training(cfg)
    finally:
        backend._impl = original


def _bench_sim(native, steps, repeats):
    cfg = SimConfig(steps=steps, seed=7)
    pure_result = _run_sim(_pure, cfg)
    t_pure = _time(lambda: _run_sim(_pure, cfg), repeats)
    if native is not None:
        native_result = _run_sim(native, cfg)
        for a, b in zip(pure_result.trace, native_result.trace):
            assert a == b, f"backend mismatch at step {a.step}: {a} != {b}"
        t_native = _time(lambda: _run_sim(native, cfg), repeats)
    else:
        t_native = None
    return [(f"simulation steps={steps}", t_pure, t_native)]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="2000,8000,32000",
                        help="text sizes for the substring benchmark")
    parser.add_argument("--steps", type=int, default=300, help="simulation steps")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    native = backend.native_module()
    if native is None:
        print("native backend unavailable; timing the pure backend only\n")

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    rows = _bench_substring(native, sizes, args.repeats)
    rows += _bench_sim(native, args.steps, args.repeats)

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'pure':>10}  {'native':>10}  {'speedup':>8}")
    for name, t_pure, t_native in rows:
        if t_native is None:
            print(f"{name:<{width}}  {t_pure * 1e3:>8.2f}ms  {'-':>10}  {'-':>8}")
        else:
            print(
                f"{name:<{width}}  {t_pure * 1e3:>8.2f}ms  {t_native * 1e3:>8.2f}ms"
                f"  {t_pure / t_native:>7.1f}x"
            )
    if native is not None:
        print("\nbackends agree exactly on all benchmarked inputs")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
