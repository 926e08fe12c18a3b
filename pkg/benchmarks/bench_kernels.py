"""Time the compiled kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--T 100000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from repdel import _pykernels, kernels
from repdel.engine import MechanismSpec, SimulationConfig, run_simulation
from repdel.instances import two_uniform_complement


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    T = args.T
    rng = np.random.default_rng(0)
    X = rng.random((T, 2))
    Y = 1.0 - X
    grid = np.linspace(0, 1, 2001)
    Q = 10
    cases = {
        "run_ucb": lambda m: m.run_ucb(X, Y, Q, kernels.MYOPIC, 0.0),
        "run_se (adversarial)": lambda m: m.run_se(X, Y, Q, 139, 1e-5, T, kernels.ADVERSARIAL, 1e-5),
        "threshold_curve": lambda m: m.threshold_curve(X[:20_000], Y[:20_000], grid),
        "threshold_utilities": lambda m: m.threshold_utilities(X, Y, 0, 0.41),
    }
    mods = kernels.backends()
    print(f"backend in use: {kernels.BACKEND}; T = {T}")
    print(f"{'kernel':24s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        py = best_of(lambda: fn(_pykernels), args.repeat)
        if "cython" in mods:
            cy = best_of(lambda: fn(mods["cython"]), args.repeat)
            print(f"{name:24s} {py:10.4f} {cy:10.4f} {py / cy:8.1f}")
        else:
            print(f"{name:24s} {py:10.4f} {'n/a':>10s}")

    cfg = SimulationConfig(two_uniform_complement(), MechanismSpec("ucb_threshold"), T=T)
    fused = best_of(lambda: run_simulation(cfg), 1)
    loop = best_of(lambda: run_simulation(cfg, fast=False), 1)
    print(f"\nend-to-end UCB run: per-round loop {loop:.3f}s, fused kernel {fused:.3f}s ({loop / fused:.1f}x)")


if __name__ == "__main__":
    main()
