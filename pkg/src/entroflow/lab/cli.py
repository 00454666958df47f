"""Command line entry point: ``entroflow run | sweep | list-experiments``."""
from __future__ import annotations

import argparse
import os
import sys

from .config import DESCRIPTIONS, EXPERIMENTS, SWEEP_AXES, ConfigError, ExperimentConfig
from .harness import run_to_dir, sweep

THREADS_ENV = "ENTROFLOW_THREADS"


def _parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entroflow", description="Entropy and growth reproduction experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="experiment TOML file")
        p.add_argument("--out", help="output directory (default: the config's output entry)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV})")

    common(sub.add_parser("run", help="run one experiment"))
    p = sub.add_parser("sweep", help="run an experiment once per value of a parameter")
    common(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, type=_parse_values, help="comma separated values")
    sub.add_parser("list-experiments", help="list the experiment names")
    p = sub.add_parser("default-config", help="print the default TOML config of an experiment")
    p.add_argument("name", choices=EXPERIMENTS)
    return parser


def _threads(arg: int | None, fallback: int) -> int:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return fallback


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    data = cfg.to_dict()
    head = data["experiment"]
    if args.seed is not None:
        head["seed"] = args.seed
    if args.out is not None:
        head["output"] = args.out
    head["threads"] = _threads(args.threads, cfg.threads)
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-experiments":
        for name in EXPERIMENTS:
            print(f"{name:16s} {DESCRIPTIONS[name]}")
        return 0
    if args.command == "default-config":
        sys.stdout.write(ExperimentConfig.default(args.name).to_toml())
        return 0
    try:
        cfg = _load(args)
    except (OSError, ConfigError) as exc:
        print(f"entroflow: {exc}", file=sys.stderr)
        return 1
    if args.command == "run":
        report = run_to_dir(cfg)
        for row in report.rows:
            if row.passed is not None:
                status = "PASS" if row.passed else "FAIL"
                print(f"{status} {row.system} {row.quantity} = {row.estimate:.6g} ({row.tolerance})")
        for sec in report.sections:
            if sec.error:
                print(f"ERROR {sec.name}: {sec.error}", file=sys.stderr)
        print(f"wrote {cfg.output}")
        return report.exit_code
    try:
        result = sweep(cfg, args.axis, args.values)
    except ConfigError as exc:
        print(f"entroflow: {exc}", file=sys.stderr)
        return 1
    for key, err in result.errors.items():
        print(f"ERROR {key}: {err}", file=sys.stderr)
    print(f"wrote {cfg.output}/sweep.csv")
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
