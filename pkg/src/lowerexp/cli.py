"""Command line interface.

    lowerexp run --config PATH|PRESET [--seed S] [--reps R] [--out DIR] [--workers W]
    lowerexp budget --config PATH|PRESET
    lowerexp presets list
    lowerexp presets show NAME
    lowerexp schema

Exit status is 0 on success, 1 for configuration errors and 2 when a run
aborts (including every replication aborting).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .exceptions import ConfigError
from .presets import PRESETS, get_preset
from .runner import CONFIG_SCHEMA, budget_report, load_config, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lowerexp", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--config", required=True, help="JSON config path or preset name")
    r.add_argument("--seed", type=int, help="override base_seed")
    r.add_argument("--reps", type=int, help="override replications")
    r.add_argument("--out", help="output directory")
    r.add_argument("--workers", type=int, help="parallel worker processes")

    b = sub.add_parser("budget", help="print Monte Carlo draws per replication")
    b.add_argument("--config", required=True)

    pr = sub.add_parser("presets", help="list or show shipped presets")
    pr_sub = pr.add_subparsers(dest="action", required=True)
    pr_sub.add_parser("list")
    show = pr_sub.add_parser("show")
    show.add_argument("name")

    sub.add_parser("schema", help="print the config JSON schema")
    return p


def _print_aggregate(summary) -> None:
    agg = summary.aggregate()
    n_ok = len(summary.ok_records())
    print(f"replications: {n_ok} ok / {len(summary.records)} total")
    width = max(len(c) for c in agg) if agg else 10
    print(f"{'column':<{width}}  {'mean':>12}  {'sd':>12}  {'median':>12}")
    for col, s in agg.items():
        print(f"{col:<{width}}  {s['mean']:12.6g}  {s['sd']:12.6g}  {s['median']:12.6g}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "presets":
            if args.action == "list":
                for name in sorted(PRESETS):
                    print(name)
            else:
                print(json.dumps(get_preset(args.name), indent=2))
            return EXIT_OK
        if args.command == "schema":
            print(json.dumps(CONFIG_SCHEMA, indent=2))
            return EXIT_OK
        cfg = load_config(args.config)
        if args.command == "budget":
            print(budget_report(cfg))
            return EXIT_OK
        for flag, value in (("--seed", args.seed), ("--reps", args.reps), ("--workers", args.workers)):
            if value is not None and value < (0 if flag == "--seed" else 1):
                raise ConfigError("out of range", flag)
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        summary = run_experiment(cfg, seed=args.seed, replications=args.reps,
                                 out_dir=args.out, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_aggregate(summary)
    if not summary.ok_records():
        print("run aborted: every replication failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
