"""Command-line front end: run, sweep and validate subcommands."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .config import config_from_dict, load_config
from .errors import ConfigurationError
from .runner import run, sweep
from .safety import MODES


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dremcbf",
        description="Safe-adaptation simulator: finite-time identification "
        "behind a barrier-constrained input filter.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one closed-loop run")
    p_run.add_argument("--config", required=True, help="YAML config file")
    p_run.add_argument("--mode", choices=MODES, help="override barrier.mode")
    p_run.add_argument("--out", help="override output_dir (trajectory.csv, metrics.csv)")

    p_sweep = sub.add_parser("sweep", help="run every config in a directory")
    p_sweep.add_argument("--configs", required=True, help="directory of YAML configs")
    p_sweep.add_argument("--out", required=True, help="output root directory")
    p_sweep.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p_val = sub.add_parser("validate", help="check a config file and print it")
    p_val.add_argument("--config", required=True, help="YAML config file")
    return parser


def _load_with_overrides(path, mode=None, out=None):
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if mode is not None:
        raw.setdefault("barrier", {})["mode"] = mode
    if out is not None:
        raw["output_dir"] = out
    return config_from_dict(raw)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _load_with_overrides(args.config, args.mode, args.out)
            _, metrics = run(config)
            print(f"min barrier:          {metrics.min_barrier:.6g}")
            tz = metrics.t_margin_zero
            print(f"margin zero at:       {'never' if tz is None else f'{tz:.4f} s'}")
            print(f"speed-row estimates:  {metrics.final_theta_hat[1]}")
            print(f"speed-row abs errors: {metrics.final_abs_error[1]}")
            print(f"infeasible QP steps:  {metrics.qp_infeasible_count}")
            print(f"wall clock:           {metrics.wall_clock_s:.2f} s")
            if config.output_dir:
                print(f"wrote {config.output_dir}/trajectory.csv and metrics.csv")
        elif args.command == "sweep":
            paths = sorted(Path(args.configs).glob("*.yaml"))
            if not paths:
                raise ConfigurationError(f"no *.yaml configs in {args.configs}")
            results = sweep(paths, args.out, jobs=args.jobs)
            failed = 0
            for name, metrics, error in results:
                if error is not None:
                    failed += 1
                    print(f"{name}: FAILED ({error})")
                else:
                    tz = metrics.t_margin_zero
                    print(
                        f"{name}: min_barrier={metrics.min_barrier:.6g} "
                        f"margin_zero={'never' if tz is None else f'{tz:.3f}s'}"
                    )
            print(f"comparison table: {Path(args.out) / 'comparison.csv'}")
            return 1 if failed else 0
        elif args.command == "validate":
            config = load_config(args.config)
            from .runner import build_run

            build_run(config)  # exercises every module precondition
            tree = {}
            for key, value in sorted(config.flat.items()):
                tree[key] = value
            print(yaml.safe_dump(tree, default_flow_style=False), end="")
            print("config OK")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
