"""``ergokit`` command line."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from ..exceptions import ErgokitError, ValidationError
from .config import load_config
from .experiments import list_experiments
from .runner import resolve_parameters, run_experiment

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _parser():
    ap = argparse.ArgumentParser(prog="ergokit", description="Ergodic-average experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="override the configured seed")
    run.add_argument("--out", help="override the output directory")
    sub.add_parser("list", help="list available experiments")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    return ap


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command == "list":
        for name, desc in list_experiments():
            print(f"{name:20s} {desc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            if args.seed < 0:
                raise ValidationError("seed must be non-negative")
            cfg = replace(cfg, seed=args.seed)
        resolve_parameters(cfg)
    except ValidationError as exc:
        print(f"ergokit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.experiment})")
        return EXIT_OK
    try:
        report = run_experiment(cfg, args.out)
    except ErgokitError as exc:
        detail = json.dumps(getattr(exc, "diagnostics", {}), default=str)
        print(f"ergokit: {cfg.experiment} failed: {exc} {detail}", file=sys.stderr)
        return EXIT_FAILED
    for c in report.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    print(f"{cfg.experiment}: {'passed' if report.passed else 'FAILED'} "
          f"in {report.wall_time:.1f}s")
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
