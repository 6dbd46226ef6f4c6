"""Benchmark the compiled kernels against the pure numpy fallback.

Times the three hot paths (gain synthesis, mean rollout, trial ensemble)
on the standard saccade setup. The numpy numbers come from a child process
started with SACCADE_OC_PURE=1, so both backends run the same code in the
same interpreter state.

    python3 benchmarks/bench_kernels.py [--trials 2000] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def run_benchmark(trials: int, repeat: int) -> dict:
    import saccadeoc._kernels as kernels
    from saccadeoc.verification import standard_problem

    system, cost, alpha, desired = standard_problem(alpha=0.2)
    A, B = system.A, system.B
    Q, R, xd = cost.Q_seq, cost.R_seq, cost.x_d_seq
    x1 = np.zeros(A.shape[0])

    def best(fn) -> float:
        times = []
        for _ in range(repeat):
            start = time.perf_counter()
            fn()
            times.append(time.perf_counter() - start)
        return min(times)

    G, b = kernels.backward_pass(A, B, Q, R, xd, alpha)[:2]
    U = kernels.mean_rollout(A, B, G, b, x1)[1]
    noise = np.random.default_rng(0).standard_normal((trials, U.shape[0], B.shape[1]))

    return {
        "implementation": kernels.implementation_name(),
        "steps": int(xd.shape[0]),
        "trials": trials,
        "backward_pass": best(lambda: kernels.backward_pass(A, B, Q, R, xd, alpha)),
        "mean_rollout": best(lambda: kernels.mean_rollout(A, B, G, b, x1)),
        "ensemble": best(lambda: kernels.ensemble(A, B, U, alpha, noise, x1, False)),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=2000,
                        help="ensemble size for the trial benchmark")
    parser.add_argument("--repeat", type=int, default=5,
                        help="repetitions per kernel; best time wins")
    parser.add_argument("--json", action="store_true",
                        help="emit one backend's raw numbers (used internally)")
    args = parser.parse_args()

    if args.json:
        print(json.dumps(run_benchmark(args.trials, args.repeat)))
        return 0

    here = run_benchmark(args.trials, args.repeat)
    env = dict(os.environ, SACCADE_OC_PURE="1")
    child = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--json",
         "--trials", str(args.trials), "--repeat", str(args.repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    pure = json.loads(child.stdout)
    if here["implementation"] == "numpy":
        print("extension not built; both runs use the numpy backend")

    print(f"standard saccade setup: {here['steps']} steps, "
          f"{args.trials} trials, best of {args.repeat}")
    print(f"{'kernel':<14} {here['implementation']:>12} {'numpy':>12} {'speedup':>9}")
    for key in ("backward_pass", "mean_rollout", "ensemble"):
        ratio = pure[key] / here[key] if here[key] > 0 else float("inf")
        print(f"{key:<14} {here[key] * 1e3:>10.3f}ms {pure[key] * 1e3:>10.3f}ms "
              f"{ratio:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
