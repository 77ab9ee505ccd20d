"""Command line front end.

Exit codes: 0 success, 1 non-convergence or failed numerical check,
2 invalid input, 3 a converged solution that violates one of the
symmetry predicates (reserved for that case only).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ccequations import family_masses
from .classify import (
    COLLINEAR,
    CONCAVE,
    WEAK_ORDERING_ALPHA,
    check_factorization_identities,
    check_lemma_3_1,
    check_lemma_case_analysis,
    check_theorem,
    classify_configuration,
    diagnostics,
)
from .errors import ConvergenceError, DomainError, DziobekError, OracleError
from .geometry import (
    PlanarConfiguration,
    SquaredDistanceVector,
    albouy_spread,
    cayley_menger,
    cayley_menger_gradient,
    dziobek_products,
    embed,
    oriented_areas_from_positions,
    random_convex_configuration,
    squared_distances,
)
from .records import (
    DEFAULT_TIMESTAMP,
    SWEEP_COLUMNS,
    RecordError,
    RunManifest,
    configuration_record,
    dumps,
    read_configuration,
    solution_record,
    sweep_rows,
)
from .solver import (
    CONSTRAINTS,
    SQUARE_SDV,
    NonPositiveNuError,
    SolveOptions,
    TheoremWitnessError,
    constrained_solve,
    continuation_sweep,
    default_initial_sdv,
    oracle_trapezoid,
    solve_dziobek,
    solve_position,
)

log = logging.getLogger("dziobek")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_PREDICATE = 0, 1, 2, 3
CROSS_CHECK_TOL = 1e-8
IDENTITY_THRESHOLDS = {
    "planarity": 1e-10,
    "area_sum": 1e-12,
    "dziobek_identity": 1e-8,
    "gradient_vs_finite_difference": 1e-8,
    "albouy_spread": 1e-10,
}


class UsageError(Exception):
    pass


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _manifest(args) -> RunManifest:
    params = {
        k: v for k, v in sorted(vars(args).items())
        if k not in ("func", "command", "seed", "timestamp", "verbose", "out")
    }
    return RunManifest(args.command, params, args.seed, __version__, args.timestamp)


def _options(args) -> SolveOptions:
    return SolveOptions(
        max_iterations=args.max_iter, residual_tolerance=args.tol,
        jacobian_mode=args.jacobian, seed=args.seed,
    )


def _alpha(value: float) -> float:
    if not (0 < value <= 1):
        raise UsageError(f"alpha must lie in (0, 1], got {value}")
    return value


def _perturbed_sdv(sdv: SquaredDistanceVector, eps: float, seed: int) -> SquaredDistanceVector:
    """Move each embedded body by eps * diameter (Gaussian) so the guess stays planar."""
    if eps == 0:
        return sdv
    if eps < 0:
        raise UsageError("--perturb must be >= 0")
    rng = np.random.default_rng(seed)
    cfg = embed(sdv, np.ones(4))
    pos = cfg.positions + eps * cfg.diameter * rng.standard_normal((4, 2))
    return squared_distances(PlanarConfiguration(pos, cfg.masses)).normalized()


# ------------------------------------------------------------------ commands


def cmd_solve(args) -> int:
    alpha = _alpha(args.alpha)
    masses = family_masses(alpha)
    opts = _options(args)
    if args.guess:
        guess = squared_distances(read_configuration(args.guess))
    else:
        guess = default_initial_sdv(alpha)
    guess = _perturbed_sdv(guess.normalized(), args.perturb, args.seed)

    sols = {}
    for method in (("dziobek", "position") if args.method == "both" else (args.method,)):
        try:
            if method == "dziobek":
                sols[method] = solve_dziobek(alpha, guess, opts)
            else:
                sols[method] = solve_position(masses, embed(guess, masses), opts)
        except NonPositiveNuError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PREDICATE
        except ConvergenceError as exc:
            print(f"error: {method} solver did not converge: {exc}", file=sys.stderr)
            return EXIT_FAIL
        except DomainError as exc:
            raise UsageError(str(exc)) from exc

    primary = sols.get("dziobek") or sols["position"]
    diag = diagnostics(primary)
    extra = {}
    status = EXIT_OK
    if len(sols) == 2:
        p = sols["position"].sdv.normalized().as_array()
        d = sols["dziobek"].sdv.normalized().as_array()
        diff = float(np.max(np.abs(p - d) / np.abs(d)))
        extra["cross_check"] = {
            "position_sdv": p.tolist(),
            "position_residual": sols["position"].residual_position,
            "position_iterations": sols["position"].iterations,
            "max_relative_difference": diff,
            "agree": diff <= CROSS_CHECK_TOL,
        }
        if diff > CROSS_CHECK_TOL:
            print(f"error: solvers disagree (max relative difference {diff:.3e})", file=sys.stderr)
            status = EXIT_FAIL
    failed = [k for k, rep in diag.items() if not rep.passed]
    if failed:
        print(f"error: predicate failures on a converged solution: {', '.join(failed)}", file=sys.stderr)
        status = EXIT_PREDICATE
    _emit(dumps(solution_record(primary, _manifest(args), diag, **extra)), args.out)
    return status


def cmd_sweep(args) -> int:
    if not (0 < args.alpha_end <= args.alpha_start <= 1):
        raise UsageError("need 0 < --alpha-end <= --alpha-start <= 1")
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    records = continuation_sweep(args.alpha_start, args.alpha_end, args.steps, _options(args))
    buf = io.StringIO()
    buf.write("# manifest " + json.dumps(_manifest(args).as_dict(), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    writer.writerows(sweep_rows(records))
    _emit(buf.getvalue(), args.out)
    bad = [r for r in records if not r.ok]
    for r in bad:
        print(f"alpha={r.alpha!r}: {r.status}", file=sys.stderr)
    return EXIT_OK if not bad else EXIT_FAIL


def identity_errors(config: PlanarConfiguration, fd_step: float = 1e-4) -> dict:
    """Worst relative errors of the geometric identities on one configuration."""
    sdv = squared_distances(config)
    areas = oriented_areas_from_positions(config)
    scale = sdv.scale
    grad = cayley_menger_gradient(sdv)
    dziobek = -32.0 * dziobek_products(areas)
    h = fd_step * scale
    base = sdv.as_array()
    fd = np.empty(6)
    for k in range(6):
        step = np.zeros(6)
        step[k] = h
        fd[k] = (cayley_menger(SquaredDistanceVector.from_array(base + step))
                 - cayley_menger(SquaredDistanceVector.from_array(base - step))) / (2 * h)
    # derivatives of S have dimension length^4
    norm = 1.0 + np.abs(grad) / scale**2
    return {
        "planarity": abs(cayley_menger(sdv)) / scale**3,
        "area_sum": areas.sum_defect(),
        "dziobek_identity": float(np.max(np.abs(grad - dziobek) / scale**2 / norm)),
        "gradient_vs_finite_difference": float(np.max(np.abs(grad - fd) / scale**2 / norm)),
        "albouy_spread": albouy_spread(sdv, areas),
    }


def identity_suite(samples: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(IDENTITY_THRESHOLDS, 0.0)
    for _ in range(samples):
        cfg = random_convex_configuration(rng)
        for k, v in identity_errors(cfg).items():
            worst[k] = max(worst[k], v)
    return {
        k: {"worst": worst[k], "threshold": t, "passed": worst[k] < t}
        for k, t in IDENTITY_THRESHOLDS.items()
    }


def cmd_check_identities(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    report = identity_suite(args.samples, args.seed)
    _emit(dumps({"samples": args.samples, "identities": report, "manifest": _manifest(args).as_dict()}), args.out)
    return EXIT_OK if all(r["passed"] for r in report.values()) else EXIT_FAIL


def cmd_classify(args) -> int:
    try:
        config = read_configuration(args.input)
    except RecordError as exc:
        raise UsageError(str(exc)) from exc
    squared_distances(config)  # CollisionError on coincident bodies
    gc = classify_configuration(config, args.tol)
    rec = {"label": gc.label, "margins": gc.margins}
    if gc.label in (CONCAVE, COLLINEAR):
        rec["note"] = "configuration is not convex in order 1-2-3-4; theorem predicates are not applicable"
    rec["manifest"] = _manifest(args).as_dict()
    _emit(dumps(rec), args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    alpha = _alpha(args.alpha)
    if args.grid < 4:
        raise UsageError("--grid must be >= 4")
    try:
        res = oracle_trapezoid(alpha, grid=args.grid)
    except OracleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    rec = configuration_record(res.configuration, label=f"oracle alpha={alpha!r}")
    rec.update({"alpha": alpha, "s": res.s, "h": res.h, "sdv": res.sdv.as_array().tolist()})
    rec["manifest"] = _manifest(args).as_dict()
    _emit(dumps(rec), args.out)
    return EXIT_OK


def _alpha_list(args) -> list[float]:
    if args.alpha_list:
        try:
            alphas = [float(v) for v in args.alpha_list.split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --alpha-list: {exc}") from exc
    elif args.alpha_start is not None and args.alpha_end is not None and args.steps:
        if not (0 < args.alpha_end <= args.alpha_start <= 1):
            raise UsageError("need 0 < --alpha-end <= --alpha-start <= 1")
        alphas = np.round(np.linspace(args.alpha_start, args.alpha_end, args.steps), 12).tolist()
    else:
        raise UsageError("give --alpha-list or --alpha-start/--alpha-end/--steps")
    if not alphas:
        raise UsageError("no mass ratios given")
    return [_alpha(a) for a in alphas]


def verify_theorems(alphas, constraints, opts: SolveOptions) -> tuple[int, list]:
    """Constrained solves from the square (oracle seed as fallback) plus all predicates."""
    results = []
    status = EXIT_OK
    for alpha in alphas:
        for which in constraints:
            entry = {"alpha": alpha, "constraint": which}
            sol = None
            for seed_name, guess in (("square", SQUARE_SDV), ("oracle", None)):
                try:
                    guess = guess if guess is not None else default_initial_sdv(alpha)
                    sol = constrained_solve(alpha, which, guess, opts)
                    entry["start"] = seed_name
                    break
                except TheoremWitnessError as exc:
                    entry.update(status="theorem_witness_failure", message=str(exc), residual=exc.residual)
                    status = EXIT_PREDICATE
                    break
                except ConvergenceError as exc:
                    entry.update(status="not_converged", message=str(exc))
            if sol is None:
                if status != EXIT_PREDICATE:
                    status = EXIT_FAIL
                results.append(entry)
                continue
            weak = alpha > WEAK_ORDERING_ALPHA
            checks = {
                "theorem": check_theorem(sol, which),
                "nu_positive": sol.multipliers.nu > 0,
                "area_ordering": check_lemma_3_1(sol.areas, weak=weak),
                "case_analysis": check_lemma_case_analysis(sol),
                "factorization_identities": check_factorization_identities(sol.areas),
            }
            passed = all(c if isinstance(c, bool) else c.passed for c in checks.values())
            entry.update(
                status="ok" if passed else "predicate_failure",
                full_residual=sol.residual_dziobek,
                sdv=sol.sdv.as_array().tolist(),
                areas=sol.areas.as_array().tolist(),
                nu=sol.multipliers.nu,
                mu=sol.multipliers.mu,
                **{"class": sol.geometry_class},
                checks={k: (c if isinstance(c, bool) else c.as_dict()) for k, c in checks.items()},
            )
            if not passed:
                status = EXIT_PREDICATE
            results.append(entry)
    return status, results


def cmd_verify_theorems(args) -> int:
    alphas = _alpha_list(args)
    constraints = CONSTRAINTS if args.constraint == "both" else (args.constraint,)
    status, results = verify_theorems(alphas, constraints, _options(args))
    _emit(dumps({"results": results, "manifest": _manifest(args).as_dict()}), args.out)
    if status == EXIT_PREDICATE:
        print("error: theorem witness failure; see report for margins", file=sys.stderr)
    return status


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", default=None, help="output file (default: standard output)")
    common.add_argument("--timestamp", default=DEFAULT_TIMESTAMP,
                        help="timestamp recorded in the run manifest (fixed by default for reproducibility)")
    common.add_argument("-v", "--verbose", action="store_true")

    solving = argparse.ArgumentParser(add_help=False)
    solving.add_argument("--tol", type=float, default=1e-12)
    solving.add_argument("--max-iter", type=int, default=60)
    solving.add_argument("--jacobian", choices=("analytic", "finite-difference"), default="analytic")

    parser = argparse.ArgumentParser(
        prog="dziobek",
        description="Convex four-body central configurations with masses (1, 1, alpha, alpha).",
        epilog="exit codes: 0 ok, 1 non-convergence or failed check, 2 invalid input, "
               "3 converged solution violating a symmetry predicate",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common, solving], help="solve for one mass ratio")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--method", choices=("position", "dziobek", "both"), default="both")
    p.add_argument("--guess", default=None, help="configuration record used as initial guess")
    p.add_argument("--perturb", type=float, default=0.0,
                   help="move each body of the initial guess by this fraction of the diameter (uses --seed)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common, solving], help="continuation in alpha, CSV output")
    p.add_argument("--alpha-start", type=float, required=True)
    p.add_argument("--alpha-end", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-identities", parents=[common], help="geometric identities on random configurations")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_check_identities)

    p = sub.add_parser("classify", parents=[common], help="classify a configuration record")
    p.add_argument("--input", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("oracle", parents=[common], help="brute-force isosceles trapezoid solution")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--grid", type=int, default=400)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify-theorems", parents=[common, solving],
                       help="constrained solves witnessing the symmetry theorems")
    p.add_argument("--alpha-list", default=None)
    p.add_argument("--alpha-start", type=float, default=None)
    p.add_argument("--alpha-end", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--constraint", choices=(*CONSTRAINTS, "both"), default="both")
    p.set_defaults(func=cmd_verify_theorems)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, RecordError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DziobekError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
