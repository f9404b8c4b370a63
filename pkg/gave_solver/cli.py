#!/usr/bin/env python3
"""
Command-line interface for the GAVE solver.

Subcommands: certify, solve, convert, gen and bench. Exit codes are stable:
0 success, 1 input error, 2 certification failure, 3 numerical failure,
130 when interrupted.
"""

import argparse
import logging
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from gave_solver import METHODS, GaveSolver, RunReport, __version__
from gave_solver.algorithms import certify_unique, residual_norm
from gave_solver.algorithms.dynamics import settling_time_bound, settling_time_bound_lyyhc
from gave_solver.algorithms.euler import fixed_step_count, forward_euler_solve
from gave_solver.algorithms.instances import offset_start, random_solvable_gave, random_spd_lcp
from gave_solver.algorithms.reformulations import (
    gave_solution_to_hlcp,
    hlcp_to_gave,
    lcp_to_gave,
    verify_hlcp,
)
from gave_solver.algorithms.runge_kutta import reference_flow_solve
from gave_solver.core import (
    BenchRow,
    CertificationError,
    ComplementarityReport,
    ConvergenceError,
    DimensionError,
    DivergenceError,
    EulerConfig,
    FlowParams,
    GaveError,
    GeneratorSpec,
    ParameterError,
    ProblemFormatError,
    SingularMatrixError,
    StepSearchError,
    StepUnderflowError,
    TrajectoryTooShortError,
)
from gave_solver.serialization import (
    read_embedded_solution,
    read_hlcp,
    read_lcp,
    read_problem,
    write_bench_csv,
    write_iterate_log_csv,
    write_lcp,
    write_problem,
    write_trajectory_csv,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CERTIFICATION = 2
EXIT_NUMERICAL = 3
EXIT_INTERRUPTED = 130

logger = logging.getLogger(__name__)


def setup_logging(verbose: bool = False) -> None:
    """Configure logging based on verbosity level."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the exit-code contract."""
    if isinstance(error, CertificationError):
        return EXIT_CERTIFICATION
    if isinstance(
        error,
        (
            DivergenceError,
            ConvergenceError,
            StepUnderflowError,
            StepSearchError,
            TrajectoryTooShortError,
        ),
    ):
        return EXIT_NUMERICAL
    if isinstance(error, (ProblemFormatError, DimensionError, ParameterError, SingularMatrixError)):
        return EXIT_INPUT
    if isinstance(error, OSError):
        return EXIT_INPUT
    if isinstance(error, GaveError):
        return EXIT_NUMERICAL
    return EXIT_INPUT


def _add_flow_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("flow and Euler settings")
    group.add_argument("--gamma", type=float, default=1.0, help="gain gamma (default: 1)")
    group.add_argument("--rho1", type=float, default=1.0, help="finite-time weight (default: 1)")
    group.add_argument("--rho2", type=float, default=1.0, help="fixed-time weight (default: 1)")
    group.add_argument(
        "--xi", type=float, default=4.0, help="lambda1 = 1 - 2/xi, lambda2 = 1 + 2/xi (default: 4)"
    )
    group.add_argument("--lambda1", type=float, help="explicit lambda1 in (0, 1); disables k*")
    group.add_argument("--lambda2", type=float, help="explicit lambda2 > 1; disables k*")
    group.add_argument("--eta", type=float, default=0.1, help="Euler time-step (default: 0.1)")
    group.add_argument("--tol", type=float, default=1e-8, help="residual tolerance (default: 1e-8)")
    group.add_argument(
        "--max-iter", type=int, default=10**6, help="Euler iteration cap (default: 1000000)"
    )
    group.add_argument(
        "--safeguard",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="halve Euler steps that do not lower the residual; --no-safeguard runs the "
        "plain iteration (default: on)",
    )


def _add_solve_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--method", choices=METHODS, default="euler", help="solver to run (default: euler)"
    )
    parser.add_argument("--h", type=float, help="base step of the reference flow or baseline")
    parser.add_argument("--t-end", type=float, help="horizon of the reference flow or baseline")
    parser.add_argument(
        "--rho-scale", type=float, default=1.0, help="baseline network scaling (default: 1)"
    )


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments with comprehensive help."""
    parser = argparse.ArgumentParser(
        prog="gave-solver",
        description="""
GAVE Solver - fixed-time neurodynamic solver for Ax - B|x| = c

- certify: check sigma_min(A) > ||B||
- solve:   forward Euler, reference flow or baseline network
- convert: LCP/HLCP -> GAVE, optionally solving and recovering z
- gen:     seeded random certified instances
- bench:   batch runs written to a CSV table
        """,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  gave-solver gen --n 5 --seed 7 --out problem.json
  gave-solver certify problem.json
  gave-solver solve problem.json --trace trace.csv
  gave-solver solve problem.json --method reference
  gave-solver convert lcp.json --direction lcp2gave --out gave.json --solve
  gave-solver bench --n 20 --count 10 --seed 1 --out bench.csv
        """,
    )
    parser.add_argument(
        "--verbose", "-v", action="store_true", help="Enable verbose logging output"
    )
    parser.add_argument("--version", action="version", version=f"GAVE Solver {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    certify = commands.add_parser("certify", help="check unique solvability of a problem file")
    certify.add_argument("problem_file", help="GAVE problem JSON")

    solve = commands.add_parser("solve", help="solve a GAVE problem file")
    solve.add_argument("problem_file", help="GAVE problem JSON")
    _add_solve_arguments(solve)
    _add_flow_arguments(solve)
    solve.add_argument("--trace", help="write iterates or samples to this CSV")
    solve.add_argument("--seed", type=int, default=0, help="seed of the random x0 (default: 0)")
    solve.add_argument(
        "--x0-scale",
        type=float,
        default=0.0,
        help="start at this distance from the origin in a seeded random direction (default: 0)",
    )
    solve.add_argument("--force", action="store_true", help="solve uncertified problems too")

    convert = commands.add_parser("convert", help="turn an LCP or HLCP into a GAVE")
    convert.add_argument("in_file", help="LCP or HLCP JSON")
    convert.add_argument("--direction", choices=("lcp2gave", "hlcp2gave"), required=True)
    convert.add_argument("--out", required=True, help="GAVE problem JSON to write")
    convert.add_argument("--solve", action="store_true", help="solve and verify the result")
    _add_solve_arguments(convert)
    _add_flow_arguments(convert)

    gen = commands.add_parser("gen", help="generate a random certified instance")
    gen.add_argument("--kind", choices=("gave", "lcp"), default="gave")
    gen.add_argument("--n", type=int, required=True, help="dimension")
    gen.add_argument("--gap", type=float, default=1.0, help="sigma_min(A) - ||B|| (default: 1)")
    gen.add_argument("--scale", type=float, default=1.0, help="magnitude of x* (default: 1)")
    gen.add_argument("--seed", type=int, default=0, help="generator seed (default: 0)")
    gen.add_argument("--identity-b", action="store_true", help="use B = I")
    gen.add_argument("--out", required=True, help="JSON file to write")

    bench = commands.add_parser("bench", help="run Euler and the reference flow on many instances")
    bench.add_argument("--n", type=int, default=20, help="dimension (default: 20)")
    bench.add_argument("--count", type=int, default=10, help="number of instances (default: 10)")
    bench.add_argument("--gap", type=float, default=1.0, help="instance gap (default: 1)")
    bench.add_argument("--scale", type=float, default=1.0, help="magnitude of x* (default: 1)")
    bench.add_argument("--seed", type=int, default=0, help="seed of instance 0 (default: 0)")
    bench.add_argument("--identity-b", action="store_true", help="use B = I and report both bounds")
    bench.add_argument("--h", type=float, help="reference flow step (default: T_max / 10^4)")
    bench.add_argument("--workers", type=int, default=1, help="parallel instances (default: 1)")
    bench.add_argument("--out", required=True, help="CSV table to write")
    _add_flow_arguments(bench)

    return parser.parse_args(argv)


def build_solver(args: argparse.Namespace) -> GaveSolver:
    """Solver configured from the flow and Euler flags."""
    config = EulerConfig(
        eta=args.eta, xi=args.xi, max_iter=args.max_iter, tol=args.tol, safeguard=args.safeguard
    )
    if args.lambda1 is not None or args.lambda2 is not None:
        if args.lambda1 is None or args.lambda2 is None:
            raise ParameterError("--lambda1 and --lambda2 must be given together")
        params = FlowParams(args.gamma, args.rho1, args.rho2, args.lambda1, args.lambda2)
    else:
        params = FlowParams.from_xi(args.xi, args.gamma, args.rho1, args.rho2)
    return GaveSolver(params, config)


def _print_report(report: RunReport, x_star: Optional[np.ndarray] = None) -> None:
    cert = report.certificate
    print(f"  sigma_min(A) = {cert.sigma_min_A!r}, ||B|| = {cert.norm_B!r}, gap = {cert.gap!r}")
    if report.bound is not None:
        print(f"  T_max        = {report.bound.t_max!r}")
    if report.bound_lyyhc is not None:
        print(f"  T_max (B=I, earlier bound) = {report.bound_lyyhc.t_max!r}")
    if report.k_star is not None:
        print(f"  k*           = {report.k_star}")
    if report.settling_estimate is not None:
        print(f"  settling time from x0 <= {report.settling_estimate!r}")
    label = "iterations" if report.method == "euler" else "samples"
    print(f"  method       = {report.method}, {label} = {report.steps}")
    print(f"  time         = {report.time_used!r}")
    if report.log is not None and report.log.safeguarded:
        print(f"  safeguard    = on ({report.log.halvings} halvings)")
    print(f"  residual     = {report.final_residual!r}")
    print(f"  x            = {np.array2string(report.x, precision=10)}")
    if x_star is not None:
        print(f"  error        = {float(np.linalg.norm(report.x - x_star))!r}")
    for path in report.output_paths:
        print(f"  wrote {path}")


def cmd_certify(args: argparse.Namespace) -> int:
    problem = read_problem(args.problem_file)
    cert = certify_unique(problem)
    print(f"Problem: {args.problem_file} (n={problem.n})")
    print(f"  sigma_min(A) = {cert.sigma_min_A!r}")
    print(f"  ||B||        = {cert.norm_B!r}")
    print(f"  gap          = {cert.gap!r}")
    if cert.certified:
        print("OK Unique solution certified")
        return EXIT_OK
    print("X Not certified: sigma_min(A) <= ||B||")
    return EXIT_CERTIFICATION


def cmd_solve(args: argparse.Namespace) -> int:
    problem = read_problem(args.problem_file)
    x_star = read_embedded_solution(args.problem_file)
    solver = build_solver(args)
    x0 = offset_start(np.zeros(problem.n), args.x0_scale, args.seed)

    print(f"Solving {args.problem_file} (n={problem.n}) with method={args.method}")
    print("-" * 60)
    report = solver.solve(
        problem,
        method=args.method,
        x0=x0,
        force=args.force,
        h=args.h,
        t_end=args.t_end,
        rho_scale=args.rho_scale,
        x_star=x_star,
    )
    if args.trace:
        if report.log is not None:
            write_iterate_log_csv(args.trace, report.log)
        elif report.trajectory is not None:
            write_trajectory_csv(args.trace, report.trajectory)
        report.output_paths.append(args.trace)
    print("OK Solution found")
    _print_report(report, x_star)
    return EXIT_OK


def _print_complementarity(check: ComplementarityReport) -> None:
    print(f"  min z = {check.min_z!r}, min w = {check.min_w!r}, w^T z = {check.inner_product!r}")
    if check.equation_residual:
        print(f"  ||Cz - Dw - p|| = {check.equation_residual!r}")
    print(f"  feasible = {check.feasible}, complementary = {check.complementary}")


def cmd_convert(args: argparse.Namespace) -> int:
    if args.direction == "lcp2gave":
        lcp = read_lcp(args.in_file)
        problem = lcp_to_gave(lcp)
    else:
        hlcp = read_hlcp(args.in_file)
        problem = hlcp_to_gave(hlcp)
    write_problem(args.out, problem)
    print(f"OK Converted {args.in_file} ({args.direction}) -> {args.out}")
    if not args.solve:
        return EXIT_OK

    solver = build_solver(args)
    if args.direction == "lcp2gave":
        try:
            result = solver.solve_lcp(lcp, method=args.method, tol=args.tol)
        except SingularMatrixError as e:
            print(f"X Cannot recover z: {e}")
            return EXIT_NUMERICAL
        _print_report(result.gave)
        check = result.complementarity
        print(f"  z = {np.array2string(result.z, precision=10)}")
    else:
        report = solver.solve(
            problem, method=args.method, h=args.h, t_end=args.t_end, rho_scale=args.rho_scale
        )
        _print_report(report)
        z, w = gave_solution_to_hlcp(report.x)
        check = verify_hlcp(hlcp, z, w, args.tol)
        print(f"  z = {np.array2string(z, precision=10)}")
        print(f"  w = {np.array2string(w, precision=10)}")
    _print_complementarity(check)
    if check.ok:
        print("OK Complementarity verified")
    else:
        print("X Complementarity check failed")
    return EXIT_OK if check.ok else EXIT_NUMERICAL


def cmd_gen(args: argparse.Namespace) -> int:
    if args.kind == "gave":
        spec = GeneratorSpec(
            n=args.n, gap=args.gap, scale=args.scale, seed=args.seed, identity_b=args.identity_b
        )
        problem, x_star = random_solvable_gave(spec)
        write_problem(args.out, problem, x_star)
    else:
        write_lcp(args.out, random_spd_lcp(args.n, args.seed))
    print(f"OK Wrote {args.kind} instance (n={args.n}, seed={args.seed}) to {args.out}")
    return EXIT_OK


def _bench_one(args: argparse.Namespace, solver: GaveSolver, index: int) -> BenchRow:
    seed = args.seed + index
    spec = GeneratorSpec(
        n=args.n, gap=args.gap, scale=args.scale, seed=seed, identity_b=args.identity_b
    )
    problem, _ = random_solvable_gave(spec)
    cert = certify_unique(problem)
    cert.require()
    bound = settling_time_bound(solver.params, cert)
    earlier = None
    if problem.is_identity_b and cert.sigma_min_A > 1.0:
        earlier = settling_time_bound_lyyhc(solver.params, problem.A).t_max
    x0 = np.zeros(problem.n)

    start = time.perf_counter()
    log = forward_euler_solve(problem, solver.params, solver.config, x0, cert=cert)
    wall_time = time.perf_counter() - start
    if not log.converged:
        raise ConvergenceError(
            f"Instance {index} (seed {seed}) stopped at residual {log.final_residual:.3e}"
        )
    h = args.h if args.h is not None else bound.t_max / 1e4
    traj = reference_flow_solve(problem, solver.params, h, bound.t_max, x0)
    return BenchRow(
        seed=seed,
        n=problem.n,
        gap=cert.gap,
        t_max=bound.t_max,
        t_max_lyyhc=earlier,
        k_star=fixed_step_count(solver.config, solver.params, cert),
        steps_used=log.steps_taken,
        final_residual=residual_norm(problem, log.final),
        reference_residual=traj.final_residual,
        wall_time=wall_time,
    )


def cmd_bench(args: argparse.Namespace) -> int:
    if args.count < 1 or args.workers < 1:
        raise ParameterError("--count and --workers must be positive")
    if args.lambda1 is not None or args.lambda2 is not None:
        raise ParameterError("bench reports k* and needs the xi-form exponents")
    solver = build_solver(args)
    # fail on an unwritable path before doing any work
    with open(args.out, "w", encoding="utf-8"):
        pass

    print(f"Benchmarking {args.count} instances (n={args.n}, seed={args.seed})")
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda i: _bench_one(args, solver, i), range(args.count)))
    write_bench_csv(args.out, rows)

    worst = max(row.final_residual for row in rows)
    print(f"OK Wrote {len(rows)} rows to {args.out} (worst residual {worst:.3e})")
    if args.identity_b:
        tighter = sum(
            1 for row in rows if row.t_max_lyyhc is not None and row.t_max < row.t_max_lyyhc
        )
        print(f"  T_max below the earlier bound in {tighter}/{len(rows)} instances")
    return EXIT_OK


COMMANDS = {
    "certify": cmd_certify,
    "solve": cmd_solve,
    "convert": cmd_convert,
    "gen": cmd_gen,
    "bench": cmd_bench,
}


def run(argv: Optional[List[str]] = None) -> int:
    """Run one command and return its exit code."""
    args = parse_arguments(argv)
    setup_logging(args.verbose)
    logger.info(f"Starting GAVE Solver: {args.command}")
    try:
        code = COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print("\nX Operation cancelled by user")
        return EXIT_INTERRUPTED
    except (GaveError, OSError) as e:
        code = exit_code_for(e)
        print(f"X {type(e).__name__}: {e}")
        if args.verbose:
            traceback.print_exc()
        return code
    except Exception as e:
        print(f"X Unexpected error: {e}")
        if args.verbose:
            traceback.print_exc()
        return EXIT_INPUT
    logger.info(f"GAVE Solver finished with exit code {code}")
    return code


def main() -> None:
    """Main entry point for the CLI."""
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        print("\nX Operation cancelled by user")
        sys.exit(EXIT_INTERRUPTED)


if __name__ == "__main__":
    main()
