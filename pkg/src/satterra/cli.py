"""Command-line entry point: ``satterra <subcommand> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
import time

from . import CONFIG_SCHEMA_VERSION, __version__
from .harness import (PROFILES, ConfigError, ExperimentConfig, dump_statistics, run_experiment,
                      write_outputs)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILED = 3

SUBCOMMANDS = ("validate", "cdf", "maxmin", "congestion", "stats-dump")
_NEEDS_CONFIG = ("cdf", "maxmin", "congestion", "stats-dump")


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment configuration")
    common.add_argument("--seed", type=_seed, metavar="U64", help="override master_seed")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory")
    common.add_argument("--profile", choices=PROFILES, default=None,
                        help="base defaults under the config (default: desk)")
    common.add_argument("--threads", type=_positive, default=1, metavar="N",
                        help="worker threads; never changes numeric output")
    common.add_argument("-v", "--verbose", action="store_true", help="log warnings")

    parser = argparse.ArgumentParser(
        prog="satterra",
        description="Uplink throughput and power control for satellite plus cell-free AP networks.")
    parser.add_argument("--version", action="version",
                        version=f"satterra {__version__} (config schema {CONFIG_SCHEMA_VERSION})")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    helps = {
        "validate": "closed form against Monte Carlo on seeded drops",
        "cdf": "sum and min throughput CDFs per system mode",
        "maxmin": "full power against max-min fair power control",
        "congestion": "satisfaction, fairness and power under per-user targets",
        "stats-dump": "per-user channel statistics of one drop",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "stats-dump":
            p.add_argument("--drop", type=int, default=0, metavar="I", help="drop index")
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        if args.command in _NEEDS_CONFIG:
            raise ConfigError(f"{args.command} needs --config PATH")
        cfg = ExperimentConfig.profile(args.profile or "desk")
    else:
        cfg = ExperimentConfig.from_json(args.config, args.profile)
    changes = {}
    if args.command in ("validate", "cdf", "maxmin", "congestion"):
        changes["kind"] = args.command
    if args.seed is not None:
        changes["master_seed"] = args.seed
    try:
        return cfg.replace(**changes) if changes else cfg
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _headline(kind: str, summary: dict) -> str:
    keys = {
        "validate": ("max_gap", "exceeded"),
        "cdf": ("mean_sum_hybrid", "mean_min_hybrid"),
        "maxmin": ("mean_min_fullpower_hybrid", "mean_min_maxmin_hybrid"),
        "congestion": tuple(k for k in summary if k.startswith("unsatisfied_pct_")),
    }[kind]
    parts = []
    for key in keys:
        if key in summary:
            v = summary[key]
            parts.append(f"{key}={v:.4g}" if isinstance(v, float) else f"{key}={v}")
    return " ".join(parts)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load_config(args)
        if args.command == "stats-dump":
            if args.drop < 0:
                raise ConfigError("--drop must be nonnegative")
            path = dump_statistics(config, args.drop, args.out)
            print(f"stats-dump: drop={args.drop} users={config.users} aps={config.aps} -> {path}")
            return EXIT_OK
        t0 = time.perf_counter()
        result = run_experiment(config, args.threads)
        wall = time.perf_counter() - t0
        write_outputs(result, args.out)
    except ConfigError as exc:
        print(f"satterra: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = result.summary
    drops = summary.get("drops", len(result.records))
    print(f"{result.kind}: drops={drops} failed={len(result.failed)} wall={wall:.2f}s "
          f"{_headline(result.kind, summary)}".rstrip())
    if result.failed or summary.get("exceeded", 0):
        return EXIT_FAILED
    return EXIT_OK


def main() -> None:
    sys.exit(run())
