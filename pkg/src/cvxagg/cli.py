"""Command-line entry point: solve, sparsify, rates, isomorphism, experiment.

Exit codes: 0 success, 1 usage error, 2 numerical failure (non-convergence or
an incomplete experiment).  All randomness flows from explicit seed flags, so
identical invocations produce identical bytes; --jobs never changes output.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import sys

from . import csvio, localization, sparsify
from .experiments import load_config, run_grid
from .model import combine
from .rates import rate_table
from .risk import population_risk, variance_term
from .solver import SolverConfig, erm_convex_hull


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvxagg",
        description="Convex aggregation by empirical risk minimization: solvers and verification tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="hull ERM on a dictionary and sample, JSON solution out")
    solve.add_argument("--dict", dest="dict_path", required=True)
    solve.add_argument("--samples", dest="samples_path", required=True)
    solve.add_argument("--tol", type=float, default=1e-8)
    solve.add_argument("--max-iter", type=int, default=100_000)
    solve.add_argument("--out", default=None)

    sp = sub.add_parser("sparsify", help="draw a sparsifying multiset and compare risks, CSV out")
    sp.add_argument("--dict", dest="dict_path", required=True)
    sp.add_argument("--problem", dest="problem_path", required=True)
    sp.add_argument("--weights", dest="weights_path", required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None)

    rates = sub.add_parser("rates", help="rate table over an (n, M) grid, CSV out")
    rates.add_argument("--n-grid", type=_int_list, required=True)
    rates.add_argument("--m-grid", type=_int_list, required=True)
    rates.add_argument("--out", default=None)

    iso = sub.add_parser("isomorphism", help="violation rates for the segment comparison, CSV out")
    iso.add_argument("--problem", dest="problem_path", required=True)
    iso.add_argument("--dict", dest="dict_path", required=True)
    iso.add_argument("--n", type=int, required=True)
    iso.add_argument("--x", type=_float_list, default=[1.0, 2.0])
    iso.add_argument("--c0", type=float, default=None, help="comparison constant; calibrated when omitted")
    iso.add_argument("--m", type=int, default=2, help="multiset size for the net functions")
    iso.add_argument("--num-functions", type=int, default=10)
    iso.add_argument("--num-segments", type=int, default=10)
    iso.add_argument("--reps", type=int, default=500)
    iso.add_argument("--seed", type=int, default=0)
    iso.add_argument("--jobs", type=int, default=1)
    iso.add_argument("--out", default=None)

    exp = sub.add_parser("experiment", help="run a rate experiment grid from a JSON config")
    exp.add_argument("--config", required=True)
    exp.add_argument("--out", required=True)
    exp.add_argument("--jobs", type=int, default=1)

    return parser


def _cmd_solve(args) -> int:
    dictionary = csvio.read_dictionary(args.dict_path)
    samples = csvio.read_samples(args.samples_path)
    cfg = SolverConfig(max_iterations=args.max_iter, tolerance=args.tol)
    solution = erm_convex_hull(dictionary, samples, cfg)
    payload = {
        "weights": [float(w) for w in solution.weights.weights],
        "empirical_risk": solution.empirical_risk,
        "duality_gap": solution.duality_gap,
        "iterations": solution.iterations,
        "converged": solution.converged,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if not solution.converged:
        print("solver did not reach its duality-gap tolerance", file=sys.stderr)
        return 2
    return 0


def _cmd_sparsify(args) -> int:
    dictionary = csvio.read_dictionary(args.dict_path)
    problem = csvio.read_problem(args.problem_path)
    weights = csvio.read_weights(args.weights_path)
    ms = sparsify.sparsify_random(weights, args.m, args.seed)
    combined_risk = population_risk(combine(dictionary, weights), problem)
    ms_risk = population_risk(
        combine(dictionary, ms.counts(dictionary.size_M) / ms.m), problem
    )
    expected = sparsify.expected_sparsified_risk(weights, args.m, dictionary, problem)
    lines = ["kind,value"]
    lines += [f"multiset_index,{i}" for i in ms.indices]
    lines.append(f"risk_combined,{combined_risk!r}")
    lines.append(f"risk_multiset_average,{ms_risk!r}")
    lines.append(f"risk_expected_sparsified,{expected!r}")
    lines.append(f"variance_term,{variance_term(weights, dictionary, problem)!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_rates(args) -> int:
    lines = ["n,M,psi,phi,regime"]
    for point in rate_table(args.n_grid, args.m_grid):
        lines.append(f"{point.n},{point.M},{point.psi!r},{point.phi!r},{point.regime}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_isomorphism(args) -> int:
    problem = csvio.read_problem(args.problem_path)
    dictionary = csvio.read_dictionary(args.dict_path)
    segments = localization.random_net_segments(
        dictionary, args.m, args.num_functions, args.num_segments, args.seed
    )
    c0 = args.c0
    if c0 is None:
        c0 = localization.calibrate_c0(
            segments,
            problem,
            args.n,
            args.x,
            reps=args.reps,
            seed=args.seed + 1,
            num_net_functions=args.num_functions,
        )
    lines = ["x,c0,violations,trials,violation_rate,bound,gamma"]
    for x in args.x:
        chunks = _split_reps(args.reps, args.jobs)
        offsets = [sum(chunks[:i]) for i in range(len(chunks))]
        tasks = [
            (segments, problem, args.n, x, c0, chunk, args.seed, args.num_functions, offset)
            for chunk, offset in zip(chunks, offsets)
        ]
        if args.jobs > 1 and len(tasks) > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
                reports = list(pool.map(_isomorphism_chunk, tasks))
        else:
            reports = [_isomorphism_chunk(t) for t in tasks]
        total_viol = sum(r.violations for r in reports)
        gamma_level = reports[0].gamma_or_rho
        rate = total_viol / args.reps
        lines.append(
            f"{x!r},{c0!r},{total_viol},{args.reps},{rate!r},{4.0 * math.exp(-x)!r},{gamma_level!r}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _isomorphism_chunk(task):
    segments, problem, n, x, c0, reps, seed, num_functions, offset = task
    return localization.isomorphism_check(
        segments,
        problem,
        n,
        x,
        c0,
        reps=reps,
        seed=seed,
        num_net_functions=num_functions,
        rep_offset=offset,
    )


def _split_reps(reps: int, jobs: int) -> list[int]:
    jobs = max(1, jobs)
    base = reps // jobs
    sizes = [base + (1 if i < reps % jobs else 0) for i in range(jobs)]
    return [s for s in sizes if s > 0]


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    report = run_grid(cfg, out_dir=args.out, jobs=args.jobs)
    print(f"c_hat={report.c_hat!r} points={len(report.points)} incomplete={report.incomplete}")
    if report.incomplete:
        print("experiment incomplete: some trials did not converge", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    handlers = {
        "solve": _cmd_solve,
        "sparsify": _cmd_sparsify,
        "rates": _cmd_rates,
        "isomorphism": _cmd_isomorphism,
        "experiment": _cmd_experiment,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc, (ValueError, OSError)) else 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
