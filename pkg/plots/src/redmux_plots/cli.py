"""Command line front end: ``plots <kind> <csv> -o <image>``.

Exit codes: 0 success, 1 usage error or unreadable input, 2 malformed log
or a window that selects nothing.
"""

import argparse
import sys

from .figures import plot_margins, plot_path, plot_weights
from .logfile import LogFormatError

USAGE_ERROR = 1
CONTENT_ERROR = 2

KINDS = {
    "weights": plot_weights,
    "margins": plot_margins,
    "path": plot_path,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from simulation CSV logs.")
    parser.add_argument("kind", choices=sorted(KINDS))
    parser.add_argument("csv", help="simulation log to read")
    parser.add_argument("-o", "--output", required=True, help="PNG to write")
    parser.add_argument("--window", default=None, metavar="T0:T1",
                        help="restrict to records with T0 <= t <= T1")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0

    window = None
    if args.window is not None:
        try:
            lo, hi = args.window.split(":")
            window = (float(lo), float(hi))
        except ValueError:
            print(f"bad window {args.window!r}, expected T0:T1", file=sys.stderr)
            return USAGE_ERROR

    try:
        KINDS[args.kind](args.csv, args.output, window=window)
    except FileNotFoundError as exc:
        print(f"cannot read log: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except LogFormatError as exc:
        print(f"bad log: {exc}", file=sys.stderr)
        return CONTENT_ERROR
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return CONTENT_ERROR
    print(args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
