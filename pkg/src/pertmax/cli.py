"""Command line entry point: ``pertmax <experiment> [--config FILE] [flags]``.

Each flag overrides the config key of the same name. The exit status is 0
exactly when every assertion in the report passes.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, load_config, run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pertmax", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="file of key = value lines")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--n", dest="n_grid", type=int, nargs="+", metavar="N")
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-grid", dest="delta_grid", type=float, nargs="+", metavar="D")
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--v", type=float)
    p.add_argument("--xi", choices=("rademacher", "uniform", "gaussian", "degenerate"))
    p.add_argument("--T", type=float)
    p.add_argument("--probe-times", dest="probe_times", type=float, nargs="+", metavar="t")
    p.add_argument("--mc-draws", dest="mc_draws", type=int)
    p.add_argument("--quiet", action="store_true", help="do not print the assertion summary")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    values = load_config(args.config) if args.config else {}
    values.pop("experiment", None)
    for key, val in vars(args).items():
        if key in ("config", "quiet", "experiment") or val is None:
            continue
        values[key] = val
    values["experiment"] = args.experiment
    try:
        cfg = ExperimentConfig.from_mapping(values)
    except (ConfigError, ValueError) as exc:
        print(f"pertmax: configuration error: {exc}", file=sys.stderr)
        return 2
    report = run(cfg)
    if not args.quiet:
        for a in report.assertions:
            detail = {k: v for k, v in a.items() if k not in ("name", "passed")}
            print(f"[{'PASS' if a['passed'] else 'FAIL'}] {a['name']}  {json.dumps(detail)}")
        print(f"report written to {cfg.output_dir}/report.json")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
