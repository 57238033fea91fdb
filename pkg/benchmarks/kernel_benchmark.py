"""Times the pure-NumPy kernels against the compiled extension.

Run from the repository root after an editable install:

    python3 benchmarks/kernel_benchmark.py [--repeats 5]

Covers the two hot paths: minibatch training epochs at UCI-like sizes
and batched imagined rollouts at planner-like sizes.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from deepblr import _kernels_py

try:
    from deepblr import _core
except ImportError:
    _core = None


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def train_case(n, p, h, d, batch, epochs, seed=0):
    rng = np.random.default_rng(seed)
    n_params = h * p + h + 2 * (d * h + d)
    theta0 = rng.standard_normal(n_params) * 0.3
    x = rng.standard_normal((n, p))
    y = rng.standard_normal((n, d))
    order = rng.permutation(n).astype(np.int64)

    def runner(mod):
        def run():
            theta = theta0.copy()
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
            step = 0
            for _ in range(epochs):
                step, _ = mod.train_epoch(theta, m, v, x, y, order, None,
                                          p, h, d, 0.0, batch, 0.01,
                                          0.9, 0.999, 1e-8, step)
        return run

    return f"train n={n} p={p} h={h} d={d} x{epochs}ep", runner


def rollout_case(members, rows, horizon, h, seed=0):
    rng = np.random.default_rng(seed)
    args = (rng.standard_normal((members, h, 5)),
            rng.standard_normal((members, h)) * 0.1,
            rng.standard_normal((members, 4, h)) * 0.2,
            rng.standard_normal((members, 4)) * 0.1,
            rng.standard_normal((members, 4, h)) * 0.2,
            rng.standard_normal((members, 4)) * 0.1,
            None,
            (np.arange(rows) % members).astype(np.int64),
            rng.uniform(-10, 10, (rows, horizon)),
            rng.standard_normal((rows, horizon, 4)),
            rng.standard_normal(5) * 0.1,
            np.abs(rng.standard_normal(5)) + 0.5,
            rng.standard_normal(4) * 0.01,
            np.abs(rng.standard_normal(4)) * 0.1 + 0.05,
            np.array([0.0, 0.0, 0.3, 0.0]), 10.0, 1e6)

    def runner(mod):
        return lambda: mod.rollout_cartpole(*args)

    return f"rollout M={members} R={rows} H={horizon} h={h}", runner


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    opts = parser.parse_args()

    cases = [
        train_case(455, 13, 50, 1, 32, 40),      # Boston-sized training run
        train_case(7372, 8, 50, 1, 32, 5),       # Kin8nm-sized, fewer epochs
        train_case(1700, 5, 50, 4, 32, 35),      # dynamics refit, episode 9
        rollout_case(1, 700, 15, 50),            # single-model planner batch
        rollout_case(5, 700, 15, 50),            # ensemble planner batch
        rollout_case(5, 4000, 25, 50),           # full-size CEM iteration
    ]

    print(f"{'case':38s} {'pure':>9s} {'compiled':>9s} {'speedup':>8s}")
    for name, runner in cases:
        pure_s = time_call(runner(_kernels_py), opts.repeats)
        if _core is None:
            print(f"{name:38s} {pure_s * 1e3:8.1f}ms {'n/a':>9s} {'n/a':>8s}")
            continue
        comp_s = time_call(runner(_core), opts.repeats)
        print(f"{name:38s} {pure_s * 1e3:8.1f}ms {comp_s * 1e3:8.1f}ms "
              f"{pure_s / comp_s:7.1f}x")
    if _core is None:
        print("\ncompiled extension not importable; showing pure timings only")


if __name__ == "__main__":
    main()
