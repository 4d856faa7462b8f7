"""``haarvol`` command-line entry point.

Usage: ``haarvol <command> --config <file> [--seed N] [--out DIR] [--quick]``.
Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 resource limit.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments
from .drivers import FactorizationError, ResourceLimitError
from .experiments import ConfigError, config_hash, load_config
from .validation import load_constants, run_acceptance

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

COMMANDS = ("simulate", "convergence", "estimate", "reproduce-figures", "validate")

log = logging.getLogger("haarvol")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="haarvol", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--quick", action="store_true", help="reduced replica counts")
    p.add_argument("--format", choices=("csv", "json"), help="output format (overrides the config)")
    p.add_argument("--input", type=Path, help="estimate: read paths from a simulate CSV")
    p.add_argument("--constants", type=Path, help="validate: alternative thresholds file")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _effective_config(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.format is not None:
        cfg["format"] = args.format
    if args.quick and "replicas" in cfg:
        cfg["replicas"] = min(int(cfg["replicas"]), 5)
    return cfg


def _run(args) -> int:
    if args.command == "validate":
        constants = load_constants(args.constants)
        results = run_acceptance(constants, quick=args.quick, seed=args.seed)
        return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION

    if args.command == "reproduce-figures":
        cfg = {"seed": args.seed if args.seed is not None else experiments.FIGURE_SEED}
        records = experiments.reproduce_figures(seed=cfg["seed"])
        fmt = "csv"
    else:
        if args.config is None:
            raise ConfigError(f"{args.command} needs --config")
        cfg = _effective_config(args)
        fmt = cfg.get("format", "csv")
        if args.command == "simulate":
            records = experiments.simulate(cfg)
        elif args.command == "convergence":
            records = experiments.convergence(cfg)
        else:
            records = experiments.estimate(cfg, args.input)

    meta = {
        "command": args.command,
        "seed": cfg.get("seed", cfg.get("master_seed", 0)),
        "config_hash": config_hash(cfg),
        "config": cfg,
    }
    for rec in records:
        for path in rec.write(args.out, fmt, meta):
            log.info("wrote %s", path)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResourceLimitError, MemoryError) as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except FactorizationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
