"""Command-line front end: ``igamg solve | table | check``.

Exit codes: 0 success, 1 invariant violation, 2 invalid flags, 3 divergence.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .checks import SUITES, run_suite
from .model_problem import assemble_rhs
from .multigrid import (
    DivergenceError,
    SolverConfig,
    build_hierarchy,
    coarsest_level,
    initial_guess,
    solve_mg,
    solve_pcg,
)
from .tensor_linalg import FlopCounter, count_flops

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


@dataclass
class RunRecord:
    d: int
    p: int
    level: int
    cycle: str
    solver: str
    sigma_mode: str
    tau: float
    nu_pre: int
    nu_post: int
    tol: float
    initial_guess: str
    seed: int
    iterations: int
    converged: bool
    final_relative_residual: float | None
    contraction_estimate: float | None
    setup_seconds: float
    solve_seconds: float
    flop_counts: dict
    error: str | None = None

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and not np.isfinite(v):
                out[k] = None  # keep the output strict JSON
        return out

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


TIMING_FIELDS = ("setup_seconds", "solve_seconds")


def _sigma_arg(text: str):
    if text in ("theory", "preset"):
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'theory', 'preset' or a number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError("sigma coefficient must be positive")
    return value


def _range_arg(text: str) -> range:
    """``a..b`` (inclusive) or a single integer; ``b < a`` gives an empty range."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            return range(int(a), int(b) + 1)
        v = int(text)
        return range(v, v + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def run_case(d: int, p: int, level: int, config: SolverConfig, guess: str = "random",
             seed: int = 0) -> RunRecord:
    """One solve of the model problem; failures are recorded, not raised."""
    setup, solve = FlopCounter(), FlopCounter()
    sigma_mode = config.sigma_mode if isinstance(config.sigma_mode, str) else repr(config.sigma_mode)
    t0 = time.perf_counter()
    with count_flops(setup):
        hier = build_hierarchy(d, p, level, sigma_mode=config.sigma_mode)
        f = assemble_rhs(hier.finest.space, d)
    u0 = initial_guess(f.size, guess, seed)
    t1 = time.perf_counter()
    error = None
    with count_flops(solve):
        try:
            if config.solver == "pcg":
                res = solve_pcg(hier, f, config, u0=u0)
            else:
                res = solve_mg(hier, f, config, u0=u0)
        except DivergenceError as exc:
            res, error = exc.result, str(exc)
    t2 = time.perf_counter()
    return RunRecord(
        d=d, p=p, level=level, cycle=config.cycle, solver=config.solver, sigma_mode=sigma_mode,
        tau=config.tau, nu_pre=config.nu_pre, nu_post=config.nu_post, tol=config.tol,
        initial_guess=guess, seed=seed, iterations=res.iterations, converged=res.converged,
        final_relative_residual=float(res.relative_residual),
        contraction_estimate=float(res.contraction),
        setup_seconds=t1 - t0, solve_seconds=t2 - t1,
        flop_counts={"setup": dict(sorted(setup.counts.items())),
                     "solve": dict(sorted(solve.counts.items()))},
        error=error,
    )


def _config_from(args) -> SolverConfig:
    if args.solver == "pcg" and args.cycle != "v":
        raise ValueError("the PCG preconditioner is a V-cycle; use --cycle v")
    return SolverConfig(
        cycle=args.cycle, nu_pre=args.smoothing_steps, nu_post=args.smoothing_steps, tau=args.tau,
        sigma_mode=args.sigma, tol=args.tol, max_iter=args.max_iter, solver=args.solver,
    )


def _record_csv(rec: RunRecord) -> str:
    row = rec.as_dict()
    row["flop_counts"] = json.dumps(row["flop_counts"], sort_keys=True)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\r\n")
    w.writeheader()
    w.writerow(row)
    return buf.getvalue()


def cmd_solve(args) -> int:
    config = _config_from(args)
    rec = run_case(args.dim, args.degree, args.level, config, args.initial_guess, args.seed)
    sys.stdout.write(rec.to_json() + "\n" if args.output == "json" else _record_csv(rec))
    return EXIT_OK if rec.converged else EXIT_DIVERGED


def _workers() -> int:
    env = os.environ.get("IGAMG_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            pass
    return n


def _table_cell(job):
    d, p, l, config, guess, seed = job
    try:
        return run_case(d, p, l, config, guess, seed)
    except Exception as exc:  # recorded as a failed cell
        return RunRecord(d=d, p=p, level=l, cycle=config.cycle, solver=config.solver,
                         sigma_mode=str(config.sigma_mode), tau=config.tau, nu_pre=config.nu_pre,
                         nu_post=config.nu_post, tol=config.tol, initial_guess=guess, seed=seed,
                         iterations=-1, converged=False, final_relative_residual=None,
                         contraction_estimate=None, setup_seconds=0.0, solve_seconds=0.0,
                         flop_counts={"setup": {}, "solve": {}}, error=f"{type(exc).__name__}: {exc}")


def table_records(d: int, levels, degrees, config: SolverConfig, guess: str = "random",
                  seed: int = 0, workers: int = 1) -> list[RunRecord]:
    jobs = [(d, p, l, config, guess, seed) for l in sorted(levels, reverse=True) for p in degrees]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_table_cell, jobs))
    return [_table_cell(j) for j in jobs]


def format_table(records, levels, degrees) -> str:
    cells = {(r.level, r.p): (r.iterations if r.converged else -1) for r in records}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["level"] + [f"p{p}" for p in degrees])
    for l in sorted(levels, reverse=True):
        w.writerow([l] + [cells.get((l, p), -1) for p in degrees])
    return buf.getvalue()


def cmd_table(args) -> int:
    config = _config_from(args)
    levels, degrees = list(args.levels), list(args.degrees)
    recs = table_records(args.dim, levels, degrees, config, args.initial_guess, args.seed,
                         workers=_workers())
    table = format_table(recs, levels, degrees)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(table)
    else:
        sys.stdout.write(table)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([r.as_dict() for r in recs], fh, indent=1, sort_keys=True)
    return EXIT_OK


def cmd_check(args) -> int:
    results = run_suite(args.suite, max_p=args.max_p, max_level=args.max_level)
    failed = [r for r in results if not r.passed]
    for r in results:
        if args.verbose or not r.passed:
            print(r.line())
    print(f"{len(results) - len(failed)}/{len(results)} invariants hold")
    return EXIT_INVARIANT if failed else EXIT_OK


def _add_solver_flags(sp, cycles=("twogrid", "v", "w")) -> None:
    sp.add_argument("--cycle", choices=cycles, default="v", type=str.lower)
    sp.add_argument("--solver", choices=("mg", "pcg"), default="mg")
    sp.add_argument("--smoothing-steps", type=_positive_int, default=1,
                    help="pre- and post-smoothing steps")
    sp.add_argument("--tau", type=float, default=1.0)
    sp.add_argument("--sigma", type=_sigma_arg, default="preset",
                    help="'theory' (12 h^-2), 'preset', or a number c meaning c h^-2")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--max-iter", type=_positive_int, default=500)
    sp.add_argument("--initial-guess", choices=("random", "zero"), default="random")
    sp.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="igamg", description="Multigrid for tensor-product spline discretizations")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the model problem once")
    s.add_argument("--dim", type=_positive_int, required=True)
    s.add_argument("--degree", type=_positive_int, required=True)
    s.add_argument("--level", type=int, required=True)
    _add_solver_flags(s)
    s.add_argument("--output", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_solve)

    t = sub.add_parser("table", help="iteration counts over levels x degrees")
    t.add_argument("--dim", type=_positive_int, required=True)
    t.add_argument("--levels", type=_range_arg, required=True)
    t.add_argument("--degrees", type=_range_arg, required=True)
    _add_solver_flags(t)
    t.add_argument("--csv", help="write the table here instead of stdout")
    t.add_argument("--json", help="write the run records here")
    t.set_defaults(func=cmd_table)

    c = sub.add_parser("check", help="run invariant suites")
    c.add_argument("--suite", choices=tuple(SUITES) + ("all",), default="all")
    c.add_argument("--max-p", type=_positive_int, default=14)
    c.add_argument("--max-level", type=_positive_int, default=8)
    c.add_argument("-v", "--verbose", action="store_true", help="print every measured value")
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        _validate(args)
    except ValueError as exc:
        print(f"igamg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


def _validate(args) -> None:
    if args.command == "check":
        return
    _config_from(args)
    if args.command == "solve" and args.level < coarsest_level(args.degree):
        raise ValueError(f"--level must be >= {coarsest_level(args.degree)} for degree {args.degree}")


if __name__ == "__main__":
    sys.exit(main())
