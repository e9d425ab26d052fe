"""Command-line entry point.

    render --in posterior_k.csv --out figs/ [--format svg|png]
           [--kmax K] [--title T]

Writes <out>/<input stem>.<format> and prints the path.
"""

from __future__ import annotations

import argparse
import os
import sys

from .render import FigureSpec, SchemaError, render_posterior_bars

__all__ = ["main"]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="render",
        description="grouped bar chart of the posterior over k from posterior_k.csv",
    )
    ap.add_argument("--in", dest="infile", required=True, help="posterior_k.csv")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--format", choices=("svg", "png"), default="svg")
    ap.add_argument("--kmax", type=int, default=None, help="crop display at this k")
    ap.add_argument("--title", default=None)
    args = ap.parse_args(argv)

    stem = os.path.splitext(os.path.basename(args.infile))[0]
    os.makedirs(args.out, exist_ok=True)
    spec = FigureSpec(
        input=args.infile,
        output=os.path.join(args.out, f"{stem}.{args.format}"),
        fmt=args.format,
        k_max=args.kmax,
        title=args.title,
    )
    try:
        path = render_posterior_bars(spec)
    except (OSError, SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
