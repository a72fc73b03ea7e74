"""Compare the compiled and numpy power-control kernels.

    python benchmarks/bench_kernels.py [--trials 1000] [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel and backend, plus the
largest relative disagreement between the two backends.
"""
import argparse
import time

import numpy as np

from irsbeam import _kernels_py

try:
    from irsbeam import _kernels as compiled
except ImportError:
    compiled = None


def instance(trials, groups, per_group, seed=0):
    rng = np.random.default_rng(seed)
    K = groups * per_group
    grp = np.repeat(np.arange(groups), per_group)
    gains = rng.exponential(size=(trials, K, groups))
    gains[:, np.arange(K), grp] *= 4.0
    return gains, np.ones(K), np.full(K, 0.1), grp


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':<10} {'g x |G|':>8} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8} {'max rel diff':>13}")
    for groups, per_group in [(1, 4), (2, 2), (4, 2), (8, 1)]:
        gains, gamma, sigma2, grp = instance(args.trials, groups, per_group)
        cases = {
            "min_power": lambda m: m.min_power_batch(gains, gamma, sigma2, grp)[0],
            "maxmin": lambda m: m.maxmin_power_batch(gains, gamma, sigma2, grp, 1.0)[1],
        }
        for name, call in cases.items():
            tp, out_p = best_time(lambda: call(_kernels_py), args.repeat)
            if compiled is None:
                print(f"{name:<10} {groups}x{per_group:<6} {tp * 1e3:10.2f}")
                continue
            tc, out_c = best_time(lambda: call(compiled), args.repeat)
            ok = np.isfinite(out_p) & (out_p != 0)
            diff = np.max(np.abs(out_c[ok] - out_p[ok]) / np.abs(out_p[ok])) if ok.any() else 0.0
            print(f"{name:<10} {groups}x{per_group:<6} {tp * 1e3:10.2f} {tc * 1e3:12.2f} {tp / tc:8.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
