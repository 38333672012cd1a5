"""Command line entry points: plot, table."""

from __future__ import annotations

import argparse
import sys

from .figures import plot_curves
from .runs import runset_from_dir
from .tables import summary_table, table_csv


def _runsets(args) -> list:
    dirs = [d for d in args.runs.split(",") if d]
    labels = [l for l in (args.labels or "").split(",") if l]
    if labels and len(labels) != len(dirs):
        raise SystemExit(f"got {len(dirs)} run directories but {len(labels)} labels")
    out = []
    for i, d in enumerate(dirs):
        out.append(runset_from_dir(d, labels[i] if labels else None))
    return out


def cmd_plot(args) -> int:
    _, written = plot_curves(_runsets(args), args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_table(args) -> int:
    thresholds = [float(x) for x in args.thresholds.split(",") if x]
    runsets = _runsets(args)
    text, mismatches = summary_table(runsets, thresholds)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table_csv(runsets, thresholds))
        print(f"wrote {args.out}")
    if mismatches:
        print("\nMISMATCH between recomputed and harness-recorded values:", file=sys.stderr)
        for line in mismatches:
            print(f"  {line}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acdc-plots",
                                     description="figures and tables from acdc run directories")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plot = sub.add_parser("plot", help="median/IQR learning curves")
    p_plot.add_argument("--runs", required=True, help="comma-separated run directories")
    p_plot.add_argument("--labels", default=None, help="comma-separated legend labels")
    p_plot.add_argument("--out", required=True, help="output figure path (.png/.svg)")
    p_plot.set_defaults(func=cmd_plot)

    p_table = sub.add_parser("table", help="TTT and regret summary")
    p_table.add_argument("--runs", required=True)
    p_table.add_argument("--labels", default=None)
    p_table.add_argument("--thresholds", required=True, help="e.g. 0.5,0.9")
    p_table.add_argument("--out", default=None, help="also write the table as CSV")
    p_table.set_defaults(func=cmd_table)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
