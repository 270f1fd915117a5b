"""Command-line front end.

Exit codes: 0 success or pass, 1 checked negative, 2 usage or parse error,
3 verification or informational-completeness failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import design as dz
from . import nonlinear as nl
from . import tomography as tm
from .algebra import FiniteField
from .exceptions import (
    CapacityError,
    DomainError,
    FormatError,
    NotInformationallyCompleteError,
    StructureError,
)
from .fileformat import errors_csv, family_hash, read_design, serialize_report, write_design
from .search import SearchConfig, certify, minimize, realize

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2, 3
THREADS_ENV = "BASISDESIGNS_THREADS"
METHODS = ("mub-odd", "mub-even", "exp", "binomial", "embed", "sum", "dim6", "from-function-file")


class UsageError(Exception):
    pass


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.6g}"


def _read_function(path: str) -> nl.NonlinearFunction:
    try:
        with open(path, encoding="utf-8") as fh:
            return nl.NonlinearFunction.loads(fh.read())
    except OSError as exc:
        raise FormatError(str(exc)) from exc


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"--method {args.method} needs " + ", ".join("--" + n for n in missing))


def _construct_family(args) -> tuple[dz.WeightedBasisFamily, nl.NonlinearFunction | None]:
    method = args.method
    if method == "dim6":
        return dz.dim6_design(), None
    if method == "mub-odd":
        _need(args, "p", "n")
        if args.p == 2:
            raise UsageError("mub-odd needs an odd prime; use mub-even for p = 2")
        f = nl.pn_square(FiniteField(args.p, args.n))
        return dz.build_design(f), f
    if method == "mub-even":
        _need(args, "n")
        f = nl.teichmuller_function(args.n)
        family = dz.build_design(f)
        return (family if args.no_dedupe else dz.dedupe(family)), f
    if method == "exp":
        _need(args, "d")
        f = nl.exp_function(args.d, args.k if args.k is not None else 1)
    elif method == "binomial":
        _need(args, "d")
        f = nl.binomial_function(args.d, args.n if args.n is not None else nl.binomial_bound(args.d))
    elif method == "embed":
        _need(args, "n")
        base = _read_function(args.function_file) if args.function_file else nl.z5_to_z6_example()
        f = nl.embed_cyclic(base, args.n)
    elif method == "sum":
        if not args.functions or len(args.functions) != 2:
            raise UsageError("--method sum needs --functions FILE1 FILE2")
        f = nl.direct_sum(_read_function(args.functions[0]), _read_function(args.functions[1]))
    elif method == "from-function-file":
        _need(args, "function_file")
        f = _read_function(args.function_file)
    else:
        raise UsageError(f"unknown method {method}")
    return dz.build_design(f), f


def cmd_construct(args) -> int:
    try:
        family, f = _construct_family(args)
    except (UsageError, DomainError, StructureError, CapacityError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = dz.verify_design(family, 2, args.tol)
    if not report.is_design[2]:
        print(f"error: construction failed verification (t=2 residual "
              f"{_fmt(report.welch_residuals[2])})", file=sys.stderr)
        return EXIT_VERIFY
    write_design(args.out, family, report)
    if args.save_function and f is not None:
        with open(args.save_function, "w", encoding="utf-8") as fh:
            fh.write(f.dumps())
    print(f"wrote {args.out}: {family.size} bases in dimension {family.dimension}, "
          f"t=2 residual {_fmt(report.welch_residuals[2])}")
    return EXIT_OK


def _print_report(report: dz.DesignReport) -> None:
    print(f"dimension {report.dimension}, bases {report.bases}, tolerance {_fmt(report.tolerance)}")
    for s in sorted(report.welch_sums):
        print(f"t={s}: welch {_fmt(report.welch_sums[s])} bound {_fmt(report.bounds[s])} "
              f"residual {_fmt(report.welch_residuals[s])} "
              f"moment {_fmt(report.moment_residuals[s])} design {report.is_design[s]}")
    print(f"mutually unbiased pairs: {report.mub_pairs}")
    print(f"cross-basis overlap range: [{_fmt(report.min_overlap)}, {_fmt(report.max_overlap)}]")


def cmd_verify(args) -> int:
    try:
        family, _ = read_design(args.input)
        report = dz.verify_design(family, args.t, args.tol)
    except (FormatError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _print_report(report)
    return EXIT_OK if report.is_design[args.t] else EXIT_NEGATIVE


def _state(args, d: int) -> np.ndarray:
    if args.state == "pure-random":
        rng = np.random.default_rng([args.seed, 2 ** 31])
        return tm.pure_state(tm.random_pure_state(d, rng))
    if args.state == "mixed-identity":
        return tm.maximally_mixed(d)
    if not args.state_file:
        raise UsageError("--state file needs --state-file")
    data = np.load(args.state_file) if args.state_file.endswith(".npy") else \
        np.loadtxt(args.state_file, dtype=complex)
    return tm.as_density_matrix(data, tol=1e-10)


def cmd_tomo(args) -> int:
    try:
        family, _ = read_design(args.input)
        sigma = _state(args, family.dimension)
        alloc = tm.ShotAllocation.for_family(family, args.N)
    except (FormatError, DomainError, UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    is_design = dz.verify_design(family, 2).is_design[2]
    if not is_design and not args.force:
        print("error: family is not a 2-design (use --force to run anyway)", file=sys.stderr)
        return EXIT_VERIFY
    povm = tm.povm_from_family(family, alloc.weights)
    try:
        dual = tm.canonical_dual(povm)
    except NotInformationallyCompleteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    d, N = family.dimension, alloc.total
    mc = tm.monte_carlo_error(family, sigma, alloc, args.trials, args.seed,
                              orientation=args.mode, dual=dual, threads=args.threads)
    tight = tm.expected_error_tight(d, N, sigma)
    general = tm.expected_error_general(povm, sigma, alloc, dual)
    fixed = tm.expected_error_fixed(povm, sigma, alloc, dual)
    passed = abs(mc.mean - tight) <= 3 * mc.standard_error
    print(f"allocation {list(alloc.counts)} (N = {N})")
    print(f"empirical mean {_fmt(mc.mean)} +- {_fmt(mc.standard_error)} over {args.trials} trials")
    print(f"tight-frame prediction {_fmt(tight)}; inverse-frame closed form {_fmt(general)}; "
          f"exact for this state {_fmt(fixed)}")
    print("PASS" if passed else "FAIL", "(within 3 standard errors)" if passed else "")
    doc = {
        "family_sha256": family_hash(family),
        "dimension": d,
        "state": {"kind": args.state, "purity": tm.purity(sigma)},
        "allocation": list(alloc.counts),
        "trials": args.trials,
        "seed": args.seed,
        "orientation": args.mode,
        "empirical_mean": mc.mean,
        "standard_error": mc.standard_error,
        "prediction_tight": tight,
        "prediction_inverse_frame": general,
        "prediction_fixed_state": fixed,
        "is_2_design": is_design,
        "pass": passed,
    }
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(serialize_report(doc))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(errors_csv(mc.errors))
    return EXIT_OK if passed else EXIT_NEGATIVE


def cmd_search(args) -> int:
    try:
        config = SearchConfig(args.d, args.m, args.max_iter, args.step, args.tol,
                              args.restarts, args.seed)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = minimize(config, threads=args.threads)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(result.log_csv())
    print(f"best potential {_fmt(result.potential)} bound {_fmt(result.bound)} "
          f"gap {_fmt(result.gap)} (restart {result.restart})")
    if result.certified:
        family = realize(result.point)
        family.provenance["config"] = {k: getattr(config, k) for k in config.__dataclass_fields__}
        report = certify(result.point, args.tol)
        if args.out:
            write_design(args.out, family, report)
        print("certified 2-design")
        return EXIT_OK
    if args.out:
        doc = {"dimension": args.d, "bases": args.m, "best_potential": result.potential,
               "bound": result.bound, "gap": result.gap, "certified": False,
               "restarts": args.restarts, "seed": args.seed}
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(serialize_report(doc))
    print("not certified")
    return EXIT_NEGATIVE


def cmd_table(args) -> int:
    try:
        rows = dz.bound_table(args.dmax)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{'d':>3} {'bases':>6}  recipe")
    for d, bound in rows:
        print(f"{d:>3} {bound.bases:>6}  {bound.recipe}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="basisdesigns",
                                     description="Weighted 2-designs from orthonormal bases.")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="build and verify a design file")
    c.add_argument("--method", required=True, choices=METHODS)
    c.add_argument("--p", type=int)
    c.add_argument("--n", type=int)
    c.add_argument("--d", type=int)
    c.add_argument("--k", type=int)
    c.add_argument("--function-file")
    c.add_argument("--functions", nargs=2, metavar="FILE")
    c.add_argument("--no-dedupe", action="store_true")
    c.add_argument("--tol", type=float, default=dz.DEFAULT_TOL)
    c.add_argument("--save-function")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_construct)

    v = sub.add_parser("verify", help="check the t-design property of a design file")
    v.add_argument("--in", dest="input", required=True)
    v.add_argument("--t", type=int, default=2, choices=(1, 2, 3))
    v.add_argument("--tol", type=float, default=dz.DEFAULT_TOL)
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("tomo", help="simulate linear tomography with a design file")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--state", choices=("pure-random", "mixed-identity", "file"),
                   default="pure-random")
    t.add_argument("--state-file")
    t.add_argument("--N", type=int, required=True)
    t.add_argument("--trials", type=int, default=500)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--mode", choices=("fixed", "haar"), default="fixed")
    t.add_argument("--force", action="store_true")
    t.add_argument("--report")
    t.add_argument("--csv")
    t.add_argument("--threads", type=int, default=_default_threads())
    t.set_defaults(func=cmd_tomo)

    s = sub.add_parser("search", help="numerically minimize the frame potential")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--restarts", type=int, default=20)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iter", type=int, default=4000)
    s.add_argument("--step", type=float, default=0.5)
    s.add_argument("--out")
    s.add_argument("--log")
    s.add_argument("--threads", type=int, default=_default_threads())
    s.set_defaults(func=cmd_search)

    b = sub.add_parser("table", help="upper bounds on the number of bases, d <= dmax")
    b.add_argument("--dmax", type=int, default=50)
    b.set_defaults(func=cmd_table)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
