"""Command-line entry point.

Usage::

    greedy-mmd run --config cfg.yaml [--out trace.csv]
    greedy-mmd compare --config a.yaml b.yaml --out merged.csv [--baseline-reps R]
    greedy-mmd verify [--quick] [--only 1 5 11]
    greedy-mmd baseline --config cfg.yaml --reps R [--out baseline.csv]

Exit codes: 0 success, 1 check failure (bound violation or failed
verification), 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


def _cmd_run(args):
    from .harness import run

    cfg = load_config(args.config)
    manifest = run(cfg, args.out)
    final = manifest["final"]
    print(f"{manifest['resolved']['method']}: {manifest['iterations']} iterations, status {manifest['status']}, "
          f"final MMD^2 {final['mmd2']:.6g} -> {manifest['outputs']['csv']}")
    bound = manifest["bound"]
    if bound and bound["violations"]:
        print(f"bound violated at {bound['violations']} iterations", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _cmd_compare(args):
    from .harness import compare

    cfgs = [load_config(p) for p in args.config]
    n = compare(cfgs, args.out, args.baseline_reps, args.seed)
    print(f"wrote {n} rows to {args.out}")
    return EXIT_OK


def _cmd_baseline(args):
    from .harness import baseline

    if args.reps < 2:
        raise ConfigError("--reps must be at least 2")
    out = baseline(load_config(args.config), args.reps, args.out)
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_verify(args):
    from .checks import run_all

    results = run_all(quick=args.quick, only=set(args.only) if args.only else None)
    failed = [r for r in results if not r.passed and not r.advisory]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="greedy-mmd", description="Greedy MMD quantisation of probability measures.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration and write a trace CSV plus manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="trace CSV path (default from the config)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="run several configurations into one long-format CSV")
    p.add_argument("--config", required=True, nargs="+")
    p.add_argument("--out", default="compare.csv")
    p.add_argument("--baseline-reps", type=int, default=0, help="add an iid baseline with this many repetitions")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("verify", help="run the desk-scale acceptance suite")
    p.add_argument("--quick", action="store_true", help="smaller problems, same tolerances")
    p.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("baseline", help="iid-sample MMD^2 statistics")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_baseline)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
