"""``bench`` command line: run suites, tune weights, list task costs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .errors import ConfigError, InvalidInputError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description="Seeded benchmark harness for the hierarchical planner.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark suite")
    run.add_argument("--suite", required=True, help="suite YAML file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=1, help="episodes run in parallel processes")
    run.add_argument("--mode", choices=("hier", "hierarchical", "flat"), help="override every entry's mode")
    run.add_argument("--seed", type=int, help="override every entry's base seed")
    run.add_argument("--no-logs", action="store_true", help="skip per-episode JSONL logs")

    tune = sub.add_parser("tune", help="random-search cost weights")
    tune.add_argument("--task", required=True)
    tune.add_argument("--budget", type=int, required=True, help="number of weight candidates")
    tune.add_argument("--trials", type=int, required=True, help="episodes per candidate")
    tune.add_argument("--seed", type=int, default=0)
    tune.add_argument("--out", required=True, help="curve CSV path")
    tune.add_argument("--workers", type=int, default=1)

    show = sub.add_parser("print-task", help="list a task's cost terms")
    show.add_argument("task_id")
    return p


def _run(args) -> None:
    suite = bench.load_suite(args.suite).with_overrides(args.mode, args.seed)
    table = bench.run_benchmark(suite, args.out, workers=args.workers, log=not args.no_logs)
    sys.stdout.write(table.to_csv())
    print(f"wrote {Path(args.out) / 'results.csv'}")


def _tune(args) -> None:
    result = bench.tune_weights(args.task, args.budget, args.trials, args.seed, out_csv=args.out,
                                workers=args.workers)
    weights = ", ".join(f"{k}={v:.4g}" for k, v in sorted(result.best_weights.items()))
    print(f"best success {result.best_success:.3f} with {weights}")
    print(f"wrote {args.out}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            _run(args)
        elif args.command == "tune":
            _tune(args)
        else:
            print(bench.print_task(args.task_id))
    except (ConfigError, InvalidInputError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
