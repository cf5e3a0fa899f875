"""Command-line driver.

Commands: transform (write any stage of the reformulation chain), solve
(reference, single-level, or penalty method), sample (1-D induced set with
interval summary), generate (deterministic random instances), verify (check a
solution record against its instance).

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 boundedness failure during vertex enumeration, 4 infeasible, 5 unbounded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import (DimensionDeficientError, GenerationError,
                     InfeasibleProblemError, ParseError,
                     UnboundedPolyhedronError, UnboundedProblemError)
from .generator import GeneratorParams, generate_instance
from .model import (BilevelInstance, parse_instance, parse_solution,
                    serialize_instance, serialize_lifted, serialize_milp,
                    serialize_solution)
from .oracle import check_bilevel_feasible, render_samples, sample_induced_set, \
    solve_bilevel_bruteforce
from .rational import Rat, parse_rational
from .transform import (auto_kappa, bound_big_m, kkt_reformulate, lift_coupling,
                        linearize_big_m, penalize, serialize_system,
                        solve_with_kkt, solve_with_penalty)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_UNBOUNDED_POLYHEDRON = 3
EXIT_INFEASIBLE = 4
EXIT_UNBOUNDED = 5


def _read_instance(path: str) -> BilevelInstance:
    return parse_instance(Path(path).read_text())


def _rational_arg(text: str) -> Rat:
    try:
        return parse_rational(text)
    except ParseError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_transform(args: argparse.Namespace) -> int:
    inst = _read_instance(args.input)
    lifted = lift_coupling(inst)
    if args.stage == "lift":
        text = serialize_lifted(lifted)
    elif args.stage == "kkt":
        text = serialize_system(kkt_reformulate(lifted))
    else:
        system = kkt_reformulate(lifted)
        big_m = bound_big_m(lifted)
        if args.stage == "milp":
            text = serialize_milp(linearize_big_m(system, big_m), big_m=big_m)
        else:
            text = serialize_milp(penalize(system, big_m, args.kappa),
                                  big_m=big_m, kappa=args.kappa)
    Path(args.output).write_text(text)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    inst = _read_instance(args.input)
    if args.method == "oracle":
        sol = solve_bilevel_bruteforce(inst)
    elif args.method == "kkt":
        sol = solve_with_kkt(inst)
    elif args.kappa == "auto":
        _, sol = auto_kappa(inst)
    else:
        sol = solve_with_penalty(inst, args.kappa)
    sys.stdout.write(serialize_solution(sol))
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    inst = _read_instance(args.input)
    try:
        report = sample_induced_set(inst, args.axis, args.start, args.stop,
                                    args.step)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    Path(args.output).write_text(render_samples(report))
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    params = GeneratorParams(n=args.n, m=args.m, k=args.k, l=args.l, p=args.p,
                             coeff_range=args.range, seed=args.seed,
                             require_solvable=args.solvable)
    inst = generate_instance(params)
    Path(args.output).write_text(serialize_instance(inst))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    inst = _read_instance(args.input)
    sol = parse_solution(Path(args.solution).read_text())
    if len(sol.x) != inst.n or len(sol.y) != inst.m:
        print("error: solution dimensions do not match the instance",
              file=sys.stderr)
        return EXIT_USAGE
    failures = []
    report = check_bilevel_feasible(inst, sol.x, sol.y)
    for check in report.failures():
        failures.append(f"{check.label}: residual {check.residual}")
    expected = inst.leader_objective(sol.x, sol.y)
    if sol.kappa is not None and sol.epsilon is not None:
        expected += sol.kappa * sol.epsilon
    if expected != sol.objective:
        failures.append(f"objective mismatch: recomputed {expected}, "
                        f"recorded {sol.objective}")
    if failures:
        for line in failures:
            print(line, file=sys.stderr)
        return EXIT_VERIFY_FAILED
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blvl",
        description="Exact toolkit for linear bilevel problems with coupling "
                    "constraints: reformulate, solve three ways, sample, "
                    "generate, verify.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="write one stage of the chain")
    p.add_argument("--stage", required=True,
                   choices=["lift", "kkt", "milp", "penalty"])
    p.add_argument("--kappa", type=_rational_arg,
                   help="penalty weight (required for --stage penalty)")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("solve", help="solve and print a solution record")
    p.add_argument("--method", required=True,
                   choices=["oracle", "kkt", "penalty"])
    p.add_argument("--kappa", default="auto",
                   help='penalty weight or "auto" (penalty method only)')
    p.add_argument("-i", "--input", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sample", help="sample follower replies along one axis")
    p.add_argument("--axis", type=int, required=True)
    p.add_argument("--from", dest="start", type=_rational_arg, required=True)
    p.add_argument("--to", dest="stop", type=_rational_arg, required=True)
    p.add_argument("--step", type=_rational_arg, required=True)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("generate", help="write a deterministic random instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--p", type=int, default=1,
                   help="extra leader rows besides the box (default 1)")
    p.add_argument("--range", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--solvable", action="store_true",
                   help="rejection-sample until the reference solver succeeds")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="check a solution record exactly")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--solution", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "transform" and args.stage == "penalty" and args.kappa is None:
        parser.error("--stage penalty requires --kappa")
    if args.command == "transform" and args.kappa is not None and args.kappa <= 0:
        parser.error("--kappa must be positive")
    if args.command == "solve":
        if args.method == "penalty" and args.kappa != "auto":
            try:
                args.kappa = parse_rational(args.kappa)
            except ParseError:
                parser.error(f'--kappa must be a rational or "auto", '
                             f"got {args.kappa!r}")
            if args.kappa <= 0:
                parser.error("--kappa must be positive")
        if args.method != "penalty" and args.kappa != "auto":
            parser.error("--kappa applies only to --method penalty")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnboundedPolyhedronError, DimensionDeficientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNBOUNDED_POLYHEDRON
    except InfeasibleProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UnboundedProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNBOUNDED


if __name__ == "__main__":
    raise SystemExit(main())
