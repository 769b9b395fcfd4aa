"""Command line entry point: ``qcontrolde run|validate|plotdata``.

Exit codes: 0 success, 1 configuration error, 2 campaign abort.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, dump_config, parse_config
from .experiments import EXIT_ABORT, EXIT_CONFIG, EXIT_OK, OUTPUT_ROOT_ENV, emit_plotdata, run_experiment

log = logging.getLogger("qcontrolde")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcontrolde",
        description=f"Run optimization campaigns. Set {OUTPUT_ROOT_ENV} to redirect all run directories.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a config file")
    run.add_argument("config")
    validate = sub.add_parser("validate", help="parse and check a config file, print it with defaults filled in")
    validate.add_argument("config")
    plot = sub.add_parser("plotdata", help="write plot-ready CSV for a ledger or robustness artifact")
    plot.add_argument("artifact")
    plot.add_argument("-o", "--output", default=None)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "plotdata":
        try:
            out = emit_plotdata(args.artifact, args.output)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(out)
        return EXIT_OK

    try:
        config = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        sys.stdout.write(dump_config(config))
        return EXIT_OK

    try:
        outcome = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if outcome.status == EXIT_ABORT:
        print(f"campaign aborted: {outcome.summary}; partial artifacts in {outcome.run_dir}", file=sys.stderr)
    else:
        print(outcome.run_dir)
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
