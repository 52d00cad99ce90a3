"""Compiled kernel versus pure-Python fallback on the SCM loop.

    python3 benchmarks/bench_kernels.py [--iters N] [--repeat R]

Prints iterations per second for each backend and the max deviation
between their final iterates.
"""

import argparse
import time

import numpy as np

from scmkit import _backend
from scmkit.monotone import Affine
from scmkit.solver import PowerRandomError, ScmConfig, solve
from scmkit.testing import affine_with_constants, ball_and_halfspaces, min_norm_problem, random_feasible_stack


def cases():
    stack, F = min_norm_problem(0)
    yield "min-norm d=5 m=3", stack, F
    stack, F = ball_and_halfspaces(3)
    yield "affine ball+2 halfspaces d=4", stack, F
    rng = np.random.default_rng(1)
    stack, _ = random_feasible_stack(rng, 32, 6)
    F = Affine(affine_with_constants(rng, 32, 0.5, 2.0, skew=0.1))
    yield "affine d=32 m=6 mixed", stack, F


def best_time(stack, F, cfg, backend, repeat):
    times, x = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        x = solve(stack, F, None, cfg, backend=backend).x_final
        times.append(time.perf_counter() - t0)
    return min(times), x


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _backend.HAVE_COMPILED:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")

    cfg = ScmConfig(max_iters=args.iters, residual_tol=0.0, trace_every=args.iters,
                    error=PowerRandomError(0.1, 1.5, seed=0))
    print(f"{'case':32s} {'python it/s':>12s} {'compiled it/s':>14s} {'speedup':>8s} {'max |dx|':>9s}")
    for name, stack, F in cases():
        tp, xp = best_time(stack, F, cfg, "python", args.repeat)
        tc, xc = best_time(stack, F, cfg, "compiled", args.repeat)
        print(f"{name:32s} {args.iters / tp:12.0f} {args.iters / tc:14.0f} {tp / tc:7.1f}x "
              f"{np.max(np.abs(xp - xc)):9.1e}")


if __name__ == "__main__":
    main()
