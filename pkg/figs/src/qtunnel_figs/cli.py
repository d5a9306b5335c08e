"""`render_all --in DIR --out DIR`: render every figure from a run directory."""
from __future__ import annotations

import argparse
import sys

from .render import EmptySeriesError, MissingColumnError, render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_all",
        description="Render the report figures from qtunnel CSV artifacts.")
    parser.add_argument("--in", dest="in_dir", required=True,
                        help="directory holding the CSV artifacts")
    parser.add_argument("--out", dest="out_dir", required=True,
                        help="directory for the figure files")
    args = parser.parse_args(argv)
    try:
        paths = render_all(args.in_dir, args.out_dir)
    except (MissingColumnError, EmptySeriesError, FileNotFoundError) as exc:
        print(f"render_all: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
