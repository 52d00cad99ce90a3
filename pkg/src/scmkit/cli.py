"""Command-line entry point: ``scmkit {solve,oracle,verify}``.

Exit codes: 0 success, 1 input error, 2 iteration budget exhausted,
3 infeasible constraint set, 4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io
from .diagnostics import run_full_suite
from .oracle import BudgetExceeded, Infeasible, NonConvergence, UnsupportedSet, vip_result
from .solver import ConfigError, ScheduleExhausted, Status, solve

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("scmkit")


def _fail(msg: str) -> int:
    print(f"scmkit: error: {msg}", file=sys.stderr)
    return EXIT_INPUT


def cmd_solve(args) -> int:
    try:
        problem = io.load_problem(args.problem)
        cfg = io.load_config(args.config, unsafe_error=args.unsafe_error) if args.config else io.config_from_dict({})
        cfg.resolve_mu(problem.F)
    except (io.SchemaError, ConfigError) as exc:
        return _fail(str(exc))
    try:
        res = solve(problem.stack, problem.F, None, cfg, known=problem.known_solution,
                    backend=args.backend)
    except (ScheduleExhausted, ValueError) as exc:
        return _fail(str(exc))
    if args.trace:
        io.write_trace(args.trace, res.trace)
    summary = io.summary_dict(res, problem.known_solution)
    if args.summary:
        io.atomic_write_text(args.summary, io.dumps(summary) + "\n")
    else:
        print(io.dumps(summary))
    log.info("status=%s iters=%d backend=%s", res.status.value, res.iters, res.backend)
    return EXIT_OK if res.status is Status.RESIDUAL_MET else EXIT_BUDGET


def cmd_oracle(args) -> int:
    try:
        problem = io.load_problem(args.problem)
    except io.SchemaError as exc:
        return _fail(str(exc))
    try:
        x, active, mult, on_ball, ball_mult = vip_result(problem.F, problem.stack)
    except (UnsupportedSet, BudgetExceeded) as exc:
        return _fail(str(exc))
    except Infeasible as exc:
        print(f"scmkit: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NonConvergence as exc:
        return _fail(str(exc))
    out = {
        "schema_version": io.SCHEMA_VERSION,
        "x": [float(v) for v in x],
        "active_set": list(active),
        "multipliers": [float(v) for v in mult],
        "ball_active": bool(on_ball),
        "ball_multiplier": float(ball_mult),
    }
    if problem.known_solution is not None:
        out["dist_to_known"] = float(np.linalg.norm(x - problem.known_solution))
    text = io.dumps(out) + "\n"
    if args.out:
        io.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        problem = io.load_problem(args.problem)
        cfg = io.load_config(args.config) if args.config else io.config_from_dict({})
    except (io.SchemaError, ConfigError) as exc:
        return _fail(str(exc))
    reports = run_full_suite(problem, cfg, samples=args.samples)
    text = io.dumps([r.to_dict() for r in reports]) + "\n"
    if args.out:
        io.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    failed = [r.name for r in reports if not r.passed]
    for name in failed:
        print(f"scmkit: check failed: {name}", file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scmkit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run the sequential constraint method")
    s.add_argument("--problem", required=True)
    s.add_argument("--config")
    s.add_argument("--trace", help="JSONL trace output path")
    s.add_argument("--summary", help="summary JSON output path (default: stdout)")
    s.add_argument("--unsafe-error", action="store_true",
                   help="allow error models with q <= 1 (non-summable; exploration only)")
    s.add_argument("--backend", choices=["compiled", "python"])
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exact reference solution")
    o.add_argument("--problem", required=True)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("verify", help="run the diagnostics suite")
    v.add_argument("--problem", required=True)
    v.add_argument("--config")
    v.add_argument("--out", help="report JSON output path (default: stdout)")
    v.add_argument("--samples", type=int, default=1000)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
