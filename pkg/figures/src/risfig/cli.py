"""Command line: render a sweep CSV into a figure, optionally validating it.

Exit codes: 0 rendered (and check passed, when requested), 1 check
violations, 2 unreadable input or schema mismatch.
"""

from __future__ import annotations

import argparse
import sys

from .pipeline import MissingColumn, PlotSpec, check, render

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="risfig",
                                     description="Render BD-RIS sweep CSVs into figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="draw one figure from a sweep CSV")
    p.add_argument("--input", required=True, help="sweep CSV path")
    p.add_argument("--kind", required=True, choices=("convergence", "gain_vs_m"))
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--log-x", action="store_true")
    p.add_argument("--linear-y", action="store_true", help="disable the log gain axis")
    p.add_argument("--check", action="store_true",
                   help="validate monotonicity/ordering; nonzero exit on violation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(input_csv=args.input, kind=args.kind, output=args.out,
                    log_x=args.log_x, log_y=not args.linear_y)
    try:
        render(spec)
    except MissingColumn as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    print(f"wrote {spec.output}")
    if args.check:
        violations = check(spec)
        for violation in violations:
            print(f"check: {violation}", file=sys.stderr)
        if violations:
            return EXIT_CHECK_FAILED
        print("check: all expected properties hold")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
