"""Command-line entry point: evolve, check, convergence, decay."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import load_config
from .errors import TmsimError
from .runs import (CHECK_SUITES, EXIT_ERROR, run_check, run_convergence,
                   run_decay, run_evolve)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tmsim",
        description="Evolution and diagnostics for timelike minimal graphs "
                    "in Minkowski space.")
    p.add_argument("--version", action="version", version=f"tmsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("evolve", help="evolve a configured run and write artifacts")
    pe.add_argument("--config", required=True, help="path to a key = value config file")

    pc = sub.add_parser("check", help="run a property-check suite")
    pc.add_argument("--suite", required=True, choices=sorted(CHECK_SUITES))
    pc.add_argument("--seed", type=int, default=0)

    pv = sub.add_parser("convergence", help="grid-refinement order study")
    pv.add_argument("--config", required=True)
    pv.add_argument("--refinements", type=int, default=2, choices=(2, 3))

    pd = sub.add_parser("decay", help="decay-rate fit of an evolved run")
    pd.add_argument("--config", help="run config (omit with --fit-only)")
    pd.add_argument("--fit-only", metavar="PATH.csv",
                    help="fit an existing norms CSV instead of evolving")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "evolve":
            return run_evolve(load_config(args.config))
        if args.command == "check":
            return run_check(args.suite, seed=args.seed)
        if args.command == "convergence":
            return run_convergence(load_config(args.config), refinements=args.refinements)
        if args.command == "decay":
            if args.fit_only is None and args.config is None:
                print("decay needs --config or --fit-only", file=sys.stderr)
                return EXIT_ERROR
            cfg = load_config(args.config) if args.config else None
            return run_decay(cfg, fit_only=args.fit_only)
    except TmsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
