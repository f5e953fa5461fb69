"""Command-line entry point: ``fogslice run|compare|sweep|validate-queue``.

Exit codes: 0 success, 1 I/O / parse / configuration error, 2 iteration
limit hit, 3 infeasible scenario, 4 joint result worse than a
single-resource baseline (solver bug signal), 5 queue validation outside
tolerance. Diagnostics go to stderr; results go to CSV files in ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from pathlib import Path

from . import experiments as ex
from .admm import TRACE_HEADER, AdmmConfig, IterationTrace
from .errors import Infeasible, ScenarioError
from .local_solver import SolverSettings
from .model import load_scenario, save_scenario, validate_scenario
from .scenarios import demo_scenario, starved_scenario
from .simcore import DEFAULT_ARRIVALS, VALIDATION_HEADER, validate_allocation, validate_grid

EXIT_OK = 0
EXIT_IO = 1
EXIT_NOT_CONVERGED = 2
EXIT_INFEASIBLE = 3
EXIT_DOMINANCE = 4
EXIT_QUEUE_TOL = 5

QUEUE_TOL = 0.05

log = logging.getLogger("fogslice")


class UsageError(Exception):
    """Bad flags or unusable input; maps to exit code 1."""


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogslice", description="Joint bandwidth and fog-compute slicing.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--scenario", type=Path, help="scenario YAML file")
    src.add_argument("--generate-demo", type=_positive_int, metavar="S",
                     help="use the built-in demo region with S base stations (saved to OUT/scenario.yaml)")
    src.add_argument("--generate-starved", choices=("bandwidth", "compute"),
                     help="use a built-in region starved of one resource")
    common.add_argument("--seed", type=int, default=0, help="seed for generated scenarios and simulation")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--rho", type=_positive_float, default=1.0)
    common.add_argument("--max-iters", type=_positive_int, default=500)
    common.add_argument("--eps-abs", type=_positive_float, default=1e-6)
    common.add_argument("--eps-rel", type=_positive_float, default=1e-4)
    common.add_argument("--adaptive-rho", choices=("off", "residual_balancing"), default="off")
    common.add_argument("--workers", type=_positive_int, default=1,
                        help="threads for parallel base-station solves / grid points")
    common.add_argument("--timing", action="store_true", help="record wall-clock ms in trace.csv (else 0)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("run", parents=[common], help="solve one scenario")
    p.add_argument("--algorithm", choices=ex.ALGORITHMS, default="joint")

    sub.add_parser("compare", parents=[common], help="joint vs bandwidth-only vs compute-only")

    p = sub.add_parser("sweep", parents=[common], help="sweep one parameter for every architecture")
    p.add_argument("--sweep-param", choices=ex.SWEEP_PARAMS, required=True)
    p.add_argument("--sweep-range", required=True, metavar="LO:HI:STEPS")

    p = sub.add_parser("validate-queue", parents=[common],
                       help="simulate M/M/1 cells against the analytic sojourn time")
    p.add_argument("--arrivals", type=_positive_int, default=DEFAULT_ARRIVALS, help="arrivals per cell")
    return parser


def _config(args) -> AdmmConfig:
    return AdmmConfig(rho=args.rho, max_iters=args.max_iters, eps_abs=args.eps_abs, eps_rel=args.eps_rel,
                      adaptive_rho=args.adaptive_rho)


def _scenario(args, required=True):
    if args.generate_demo is not None:
        sc = demo_scenario(args.generate_demo, seed=args.seed)
    elif args.generate_starved is not None:
        sc = starved_scenario(args.generate_starved)
    elif args.scenario is not None:
        try:
            return load_scenario(args.scenario)
        except OSError as exc:
            raise UsageError(f"cannot read scenario {args.scenario}: {exc.strerror or exc}") from exc
    elif required:
        raise UsageError("one of --scenario, --generate-demo or --generate-starved is required")
    else:
        return None
    report = validate_scenario(sc)
    if not report.valid:
        raise UsageError("generated scenario is invalid: " + "; ".join(report.errors))
    save_scenario(sc, args.out / "scenario.yaml")
    return sc


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_trace(path: Path, trace: IterationTrace, timing: bool) -> None:
    if len(trace):
        trace.write_csv(path, timing=timing)
    else:
        _write_csv(path, TRACE_HEADER, [])


def cmd_run(args, executor) -> int:
    scenario = _scenario(args)
    sol = ex.solve(scenario, args.algorithm, _config(args), SolverSettings(), executor)
    _write_csv(args.out / "result.csv", ex.RESULT_HEADER, ex.result_rows(sol, scenario))
    _write_trace(args.out / "trace.csv", sol.trace, args.timing)
    print(f"{args.algorithm}: objective {sol.objective:.9g} s, average latency {sol.avg_latency:.9g} s, "
          f"iterations {len(sol.trace)}")
    if not sol.converged:
        log.error("iteration limit reached before convergence; last iterate written")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_compare(args, executor) -> int:
    scenario = _scenario(args)
    cmp = ex.compare(scenario, _config(args), SolverSettings(), executor)
    _write_csv(args.out / "compare.csv", ex.COMPARE_HEADER, cmp.rows())
    for arch, sol in cmp.solutions.items():
        print(f"{arch:>9}: objective {sol.objective:.9g} s, average latency {sol.avg_latency:.9g} s")
    print(f"joint reduction vs best single-resource architecture: {100 * cmp.reduction('joint'):.3f}%")
    if not cmp.dominance_ok:
        log.error("joint objective %.12g exceeds best single-resource objective %.12g by more than %g",
                  cmp.solutions["joint"].objective, cmp.best_single, ex.DOMINANCE_TOL)
        return EXIT_DOMINANCE
    if not cmp.converged:
        log.error("an iterative solve hit the iteration limit")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sweep(args, executor) -> int:
    scenario = _scenario(args)
    try:
        values = ex.parse_range(args.sweep_range)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.sweep_param == "theta" and not (values[0] < 1 and values[-1] < 1):
        raise UsageError("theta sweep values must lie in (0, 1)")
    points = ex.sweep(scenario, args.sweep_param, values, config=_config(args), settings=SolverSettings(),
                      executor=executor)
    _write_csv(args.out / "sweep.csv", ex.SWEEP_HEADER, [p.as_list() for p in points])
    bad = sum(p.status != "ok" for p in points)
    print(f"sweep {args.sweep_param}: {len(points)} points, {bad} not solved")
    return EXIT_OK


def cmd_validate_queue(args, executor) -> int:
    scenario = _scenario(args, required=False)
    if scenario is None:
        rows = validate_grid(seed=args.seed, n_arrivals=args.arrivals, executor=executor)
    else:
        sol = ex.solve(scenario, "joint", _config(args), SolverSettings())
        rows = validate_allocation(sol.allocation, scenario, seed=args.seed, n_arrivals=args.arrivals,
                                   executor=executor)
    _write_csv(args.out / "queue_validation.csv", VALIDATION_HEADER, [r.as_list() for r in rows])
    worst = max(rows, key=lambda r: r.rel_error)
    print(f"{len(rows)} cells simulated, worst relative error {100 * worst.rel_error:.3f}% "
          f"at (s={worst.s}, n={worst.n})")
    if worst.rel_error > QUEUE_TOL:
        log.error("relative error above %.0f%% tolerance", 100 * QUEUE_TOL)
        return EXIT_QUEUE_TOL
    return EXIT_OK


def _configure_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("fogslice: %(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.INFO if verbose else logging.WARNING)


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "validate-queue": cmd_validate_queue}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags; remap to the I/O/config code
        return EXIT_IO if exc.code else EXIT_OK
    _configure_logging(args.verbose)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        workers = args.workers
        ctx = ThreadPoolExecutor(max_workers=workers) if workers > 1 else nullcontext(None)
        with ctx as executor:
            return COMMANDS[args.command](args, executor)
    except Infeasible as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except (UsageError, ScenarioError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
