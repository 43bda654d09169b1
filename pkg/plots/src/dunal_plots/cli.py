"""Command line entry point for rendering experiment figures.

Exit codes: 0 on success, 1 on operational failures (unreadable or
schema-violating CSVs, unwritable outputs), 2 on usage errors.
"""

import argparse
import sys

from .figures import METRICS, plot_curves, plot_posterior_bars
from .schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dunal-plots",
        description="Render learning-curve and depth-posterior figures "
        "from experiment CSV files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    curves = sub.add_parser(
        "curves",
        help="mean ±1 std learning curves from one or more aggregate.csv files",
    )
    curves.add_argument("files", nargs="+", help="aggregate.csv files, one line each")
    curves.add_argument(
        "--metric",
        choices=sorted(METRICS),
        default="nll",
        help="which aggregated metric to plot (default: nll)",
    )
    curves.add_argument("--out", required=True, help="output image path")
    curves.add_argument("--dpi", type=int, default=150)

    posterior = sub.add_parser(
        "posterior",
        help="grouped depth-posterior bars (first vs. last round) "
        "from a depth_posteriors.csv file",
    )
    posterior.add_argument("file", help="depth_posteriors.csv file")
    posterior.add_argument("--out", required=True, help="output image path")
    posterior.add_argument(
        "--rounds",
        type=int,
        nargs=2,
        metavar=("FIRST", "SECOND"),
        help="compare these two recorded rounds instead of first/last",
    )
    posterior.add_argument("--dpi", type=int, default=150)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "curves":
            plot_curves(args.files, metric=args.metric, out=args.out, dpi=args.dpi)
        else:
            plot_posterior_bars(
                args.file, out=args.out, rounds=args.rounds, dpi=args.dpi
            )
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
