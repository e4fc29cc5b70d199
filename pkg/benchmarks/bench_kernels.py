#!/usr/bin/env python3
"""Benchmark the compiled exchange kernel against the pure-Python fallback.

Runs the same seeded workload through both backends, reports throughput in
steps per second, the speedup, and verifies that the two backends produce
bit-identical balance vectors (the fallback is run at a reduced step count
and the comparison uses a common prefix workload).

Usage: python3 benchmarks/bench_kernels.py [--agents N] [--steps K]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from kinex import _pykernels
from kinex._pykernels import CREDIT_NO_DEBT, RULE_FRAC_MEAN, RULE_SAVING
from kinex.rng import RngStream

try:
    from kinex import _ckernels
except ImportError:
    _ckernels = None


def run(backend, rule_id, n, steps, seed=42):
    m = np.full(n, 1000.0)
    rng = RngStream(seed, 0)
    lam = np.zeros(n)
    t0 = time.perf_counter()
    executed, blocked, debt = backend.run_pairwise(
        rng, m, rule_id, 0.5, 0.0, lam, CREDIT_NO_DEBT, 0.0, 0.0,
        False, 0, 1000.0, steps)
    elapsed = time.perf_counter() - t0
    return m, executed, elapsed


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--agents", type=int, default=10_000)
    parser.add_argument("--steps", type=int, default=20_000_000)
    parser.add_argument("--check-steps", type=int, default=200_000,
                        help="workload for the bit-identity comparison")
    args = parser.parse_args()

    workloads = [("saving rule", RULE_SAVING), ("random-fraction rule", RULE_FRAC_MEAN)]
    if _ckernels is None:
        print("compiled extension not available; benchmarking fallback only")
    for label, rule_id in workloads:
        print(f"== {label}, n={args.agents} ==")
        if _ckernels is not None:
            _, _, t_c = run(_ckernels, rule_id, args.agents, args.steps)
            print(f"  compiled: {args.steps / t_c / 1e6:8.2f} M steps/s "
                  f"({args.steps} steps in {t_c:.2f} s)")
        _, _, t_p = run(_pykernels, rule_id, args.agents, args.check_steps)
        print(f"  python:   {args.check_steps / t_p / 1e6:8.2f} M steps/s "
              f"({args.check_steps} steps in {t_p:.2f} s)")
        if _ckernels is not None:
            print(f"  speedup:  {t_p / args.check_steps / (t_c / args.steps):8.0f}x")
            mc, ec, _ = run(_ckernels, rule_id, args.agents, args.check_steps)
            mp, ep, _ = run(_pykernels, rule_id, args.agents, args.check_steps)
            same = np.array_equal(mc, mp) and ec == ep
            print(f"  bit-identical on {args.check_steps} steps: {same}")
            if not same:
                return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
