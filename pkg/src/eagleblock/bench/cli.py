"""Command-line entry point.

    eagleblock run <spec-file> --out <dir> [--threads N] [--preset ci|paper]
                   [--zero-walltime]
    eagleblock verify [--tol check=value ...]
    eagleblock gen --spec <spec-file> --out <file> [--seed S] [--preset ...]

`run` executes a seeded sweep and writes trace + summary CSVs; `verify`
runs the invariant suite and exits nonzero on any failure; `gen` writes a
binary problem fixture from the spec's [problem] section.
"""

from __future__ import annotations

import argparse
import sys

from .. import problemgen
from ..errors import EagleblockError
from .config import parse_spec
from .runner import run_experiment
from .verify import report, verify_suite


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eagleblock")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment spec")
    run_p.add_argument("spec", help="INI experiment spec file")
    run_p.add_argument("--out", required=True, help="output directory for CSVs")
    run_p.add_argument("--threads", type=int, default=1)
    run_p.add_argument("--preset", choices=("ci", "paper"), default=None)
    run_p.add_argument(
        "--zero-walltime",
        action="store_true",
        help="write wall_ns as 0 so repeated runs are byte-identical",
    )

    ver_p = sub.add_parser("verify", help="run the invariant suite")
    ver_p.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="CHECK=VALUE",
        help="override a check tolerance, e.g. --tol telescoping=1e-16",
    )

    gen_p = sub.add_parser("gen", help="write a binary problem fixture")
    gen_p.add_argument("--spec", required=True)
    gen_p.add_argument("--out", required=True)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--preset", choices=("ci", "paper"), default=None)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            spec = parse_spec(args.spec, preset=args.preset)
            summary = run_experiment(
                spec, args.out, threads=args.threads, zero_walltime=args.zero_walltime
            )
            for entry in summary:
                print(
                    f"{entry['solver']:>6} sweep={entry['sweep_value']:g} "
                    f"iters_to_eps median={entry['iters_to_eps_median']:g} "
                    f"mean={entry['iters_to_eps_mean']:g}"
                )
            return 0
        if args.command == "verify":
            overrides = {}
            for item in args.tol:
                key, _, value = item.partition("=")
                if not value:
                    print(f"bad --tol {item!r}, expected CHECK=VALUE", file=sys.stderr)
                    return 2
                overrides[key] = float(value)
            results = verify_suite(overrides)
            print(report(results), end="")
            return 0 if all(r.passed for r in results) else 1
        if args.command == "gen":
            spec = parse_spec(args.spec, preset=args.preset)
            problem = problemgen.generate(spec.genspec, args.seed)
            problemgen.save_problem(problem, args.out)
            print(f"wrote {args.out} ({problem.a.shape[0]}x{problem.a.shape[1]} visible block)")
            return 0
    except EagleblockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
