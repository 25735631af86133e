"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import os
import sys

from .core import EffectScale
from .errors import MetaAnalysisError
from .report import (
    BUILTIN_EXAMPLES,
    AnalysisConfig,
    analyze,
    ingest,
    load_example,
    models_from_arg,
    render,
)
from .simulation import STANDARD_GRIDS, rows_to_csv, run_standard_grid

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _level(text):
    x = float(text)
    if not 0 < x < 1:
        raise argparse.ArgumentTypeError("level must lie in (0, 1)")
    return x


def build_parser():
    p = _Parser(prog="femeta", description="Meta-analysis under common-, random- and fixed-effects models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_opts(sp):
        sp.add_argument("--models", default="all",
                        help="comma-separated subset of common,random,fixed-unweighted,"
                             "fixed-weighted,fixed-optimal (default: all)")
        sp.add_argument("--level", type=_level, default=0.95)
        sp.add_argument("--tau2", choices=("dl", "pm"), default="dl")
        sp.add_argument("--format", choices=("text", "json", "csv", "svg"), default="text")
        sp.add_argument("--out", help="write to this file instead of standard output")

    a = sub.add_parser("analyze", help="analyze a CSV file of studies")
    a.add_argument("--input", required=True)
    a.add_argument("--scale", choices=("identity", "log"), default="identity")
    model_opts(a)

    e = sub.add_parser("example", help="analyze a built-in dataset")
    e.add_argument("name", choices=sorted(BUILTIN_EXAMPLES))
    model_opts(e)

    s = sub.add_parser("simulate", help="estimator comparison over one of the standard grids")
    s.add_argument("--grid", choices=sorted(STANDARD_GRIDS), required=True)
    s.add_argument("--replicates", type=int, default=10_000,
                   help="Monte Carlo replicates per grid point (>= 1)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--step", type=float, default=0.25)
    s.add_argument("--method", choices=("analytic", "monte_carlo", "both"), default="both")
    s.add_argument("--format", choices=("csv", "svg"), default="csv")
    s.add_argument("--out")
    return p


def _emit(data: bytes, out):
    if out:
        with open(out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _color():
    return sys.stdout.isatty() and "NO_COLOR" not in os.environ


def _config(args):
    try:
        return AnalysisConfig(models_from_arg(args.models), args.level, args.tau2, args.format)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _run(args):
    if args.command in ("analyze", "example"):
        config = _config(args)
        if args.command == "analyze":
            dataset = ingest(args.input, EffectScale(args.scale))
            name = os.path.splitext(os.path.basename(args.input))[0]
            measure = "ratio" if dataset.scale is EffectScale.LOG else "effect"
        else:
            dataset, measure = load_example(args.name)
            name = args.name
        report = analyze(dataset, config, name=name, measure=measure)
        _emit(render(report, config.output, color=_color() and not args.out), args.out)
        return EXIT_OK

    if args.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if args.step <= 0:
        raise UsageError("--step must be positive")
    rows = run_standard_grid(args.grid, args.step, args.method, args.replicates, args.seed)
    if args.format == "csv":
        data = rows_to_csv(rows)
    else:
        from .svg import grid_svg

        _, axis, _ = STANDARD_GRIDS[args.grid]
        data = grid_svg(rows, title=f"grid {args.grid}", axis_label="d" if axis == "difference_d" else "r")
    _emit(data.encode("utf-8"), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _run(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (MetaAnalysisError, OSError, KeyError) as exc:
        print(f"femeta: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
