"""Command-line front end: one subcommand per experiment kind."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import KINDS, NUMERICAL_ERRORS, ConfigError, load_config, run_experiment, validate_config


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dnlslab", description="DNLS two-mode experiments")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", help="JSON config file (the experiment key may be omitted)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="rng seed for perturbations")
        sp.add_argument("--threads", type=int, default=1, help="workers for parameter sweeps")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        if cfg.get("experiment", args.kind) != args.kind:
            raise ConfigError(f"experiment: config says {cfg['experiment']!r} but subcommand is {args.kind!r}")
        cfg["experiment"] = args.kind
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        validate_config(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run_experiment(cfg, args.out, seed=args.seed, threads=args.threads)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    summary = {"result": manifest["result"], "checks": manifest["checks"]}
    print(json.dumps(summary, indent=1, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
