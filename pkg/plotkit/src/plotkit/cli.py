"""plotkit command line:  plotkit plot <figure-spec> --out <dir> [--mean]"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .figspec import parse_figspec
from .reader import EmptySeries, MissingColumn
from .render import render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit")
    sub = parser.add_subparsers(dest="command", required=True)
    plot_p = sub.add_parser("plot", help="render panels from benchmark CSVs")
    plot_p.add_argument("figspec", help="INI figure spec")
    plot_p.add_argument("--out", required=True, help="output directory")
    plot_p.add_argument("--mean", action="store_true", help="mean central line instead of median")
    args = parser.parse_args(argv)

    try:
        spec = parse_figspec(args.figspec)
        if args.mean:
            spec = dataclasses.replace(spec, stat="mean")
        written = render(spec, args.out)
        for path in written:
            print(path)
        return 0
    except (MissingColumn, EmptySeries) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
