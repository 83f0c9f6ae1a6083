"""Command line entry point: ``dolr {validate,run,sweep,fit}``.

Exit codes: 0 success, 2 validation failure, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from dolr.experiment import (ConfigError, ExperimentConfig, cmd_fit, cmd_run, cmd_sweep, cmd_validate,
                             has_errors)

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {text}")
    return v


def _values(text: str) -> list:
    if not text.strip():
        return []
    out = []
    for item in text.split(","):
        try:
            out.append(json.loads(item))
        except json.JSONDecodeError:
            out.append(item)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dolr", description="Distributed online linear regression experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_config=True):
        p.add_argument("--config", required=need_config, help="experiment JSON file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field by dotted path, e.g. algo.beta=0.5")
        p.add_argument("--out", help="output directory (default: config 'output')")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=_u64, help="override master_seed")

    common(sub.add_parser("validate", help="check parameter hypotheses without running"))
    common(sub.add_parser("run", help="run every horizon and trial, write CSVs and a summary"))
    p = sub.add_parser("sweep", help="re-run for each value of one config field")
    common(p)
    p.add_argument("--vary", required=True, help="dotted config path, e.g. graph.n")
    p.add_argument("--values", required=True, type=_values, help="comma separated values")
    p = sub.add_parser("fit", help="re-fit the growth exponent from per-run metric CSVs")
    common(p, need_config=False)
    p.add_argument("--metric", default="regret")
    return parser


def _load(args) -> ExperimentConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    return ExperimentConfig.load(args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        if args.command == "fit":
            out = args.out
            if out is None:
                if args.config is None:
                    print("error: fit needs --out or --config", file=sys.stderr)
                    return EXIT_INVALID
                out = _load(args).output
            print(json.dumps(cmd_fit(out, args.metric), indent=2, sort_keys=True))
            return EXIT_OK

        cfg = _load(args)
        issues = cmd_validate(cfg)
        for issue in issues:
            print(issue, file=sys.stderr)
        if has_errors(issues):
            return EXIT_INVALID
        if args.command == "validate":
            print("ok")
            return EXIT_OK
        if args.command == "run":
            summary = cmd_run(cfg, args.out, args.threads)
            print(json.dumps(summary["metrics"], indent=2, sort_keys=True))
        else:
            rows = cmd_sweep(cfg, args.vary, args.values, args.out, args.threads)
            print(json.dumps(rows, indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
