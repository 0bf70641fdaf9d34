"""``ruinlab`` command line.

Exit codes: 0 success, 1 numeric or I/O failure (or more than 10% failed
Monte Carlo replicates), 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import load_config
from .errors import ConfigError, RuinlabError
from .process import read_record_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
MAX_FAILURE_RATE = 0.10


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ruinlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate", "simulate a path and write record.csv / truth.csv"),
        ("estimate", "threshold estimators on a record"),
        ("invert", "regularized inversion of the survival transform"),
        ("gof", "goodness-of-fit tests of the flagged increments"),
        ("montecarlo", "replicated experiment with aggregate tables"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="key = value config file")
        sp.add_argument("--out", default=".", help="output directory (default: current)")
        if name in ("estimate", "gof"):
            sp.add_argument("--record", help="record CSV (default: simulate from the config)")
        if name == "invert":
            sp.add_argument("--estimate", help="directory written by 'estimate' (default: true parameters)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _record(cfg, path):
    if path is not None:
        return read_record_csv(path)
    from .process import discretize, simulate_path

    horizon, h = cfg.require_sim()
    return discretize(simulate_path(cfg.require_model(), horizon, cfg.seed), h)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        if args.command == "simulate":
            harness.run_simulate(cfg, out)
        elif args.command == "estimate":
            harness.run_estimate(cfg, _record(cfg, args.record), out)
        elif args.command == "invert":
            harness.run_invert(cfg, out, args.estimate)
        elif args.command == "gof":
            harness.run_gof(cfg, _record(cfg, args.record), out)
        else:
            report = harness.run_montecarlo(cfg, out)
            rate = report.failure_rate
            if rate > MAX_FAILURE_RATE:
                print(f"error: {rate:.1%} of replicates failed", file=sys.stderr)
                return EXIT_FAIL
            print(f"{len(report.rows)} replicates, {rate:.1%} failed; tables in {out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuinlabError, ArithmeticError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
