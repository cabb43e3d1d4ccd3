"""Command-line experiment runner.

Usage: ``exkin <experiment> --config <path> [--out <dir>]`` with experiment
one of relaxation, shock, certify, convergence.  Exit codes: 0 on success,
2 on configuration errors, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiments import run_certify, run_convergence, run_relaxation, run_shock

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exkin",
                                     description="Exponential integrators for kinetic relaxation equations")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, text in (
        ("relaxation", "homogeneous relaxation time series"),
        ("shock", "Sod shock tube profiles"),
        ("certify", "scheme certificate report"),
        ("convergence", "time-step convergence study"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="YAML experiment config")
        cmd.add_argument("--out", default="out", help="output directory (default: ./out)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, experiment=args.experiment)
    except ConfigError as exc:
        print(f"exkin: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.experiment == "relaxation":
            paths = run_relaxation(cfg, args.out)
        elif args.experiment == "shock":
            paths = run_shock(cfg, args.out)
        elif args.experiment == "convergence":
            paths, report = run_convergence(cfg, args.out)
            for scheme, info in sorted(report["schemes"].items()):
                print(f"{scheme}: observed order {info['observed_order']:.3f}"
                      + ("" if info["monotone"] else "  [non-monotone errors]"))
        else:
            paths, report, ok = run_certify(cfg, args.out)
            for scheme, entry in sorted(report.items()):
                if "error" in entry:
                    print(f"{scheme}: ERROR {entry['error']}")
                else:
                    print(f"{scheme}: contractive={entry['contractive']} ap={entry['ap']} "
                          f"strong_ap={entry['strong_ap']} convex={entry['convex']} "
                          f"sup_R={entry['sup_R']:.6f}")
            if not ok:
                print("exkin: unknown scheme names in certify list", file=sys.stderr)
                return EXIT_CONFIG
    except ConfigError as exc:
        print(f"exkin: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ValueError, ArithmeticError) as exc:
        print(f"exkin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
