"""Command-line entry point: ``permlab <subcommand> [flags]``.

Exit status: 0 on success (probabilistic shortfalls only warn), 1 if any
trial hit a theorem-level violation, 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ContractViolation
from .lab import (
    PARAMS,
    ConfigError,
    ExperimentConfig,
    load_record,
    magnitude_svg,
    read_config_file,
    report_summary,
    run_experiment,
    atomic_write,
    table_csv,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

SUMMARIES = {
    "permanent": "exact permanents of random symmetric matrices",
    "moments": "exact second moments, bound chain and Monte Carlo check",
    "anticonc": "small-ball probabilities of random linear forms",
    "grow": "run one of the heavy-block growth processes",
    "endgame": "one endgame step from a heavy complement-disjoint family",
    "magnitude-sweep": "log|per| against the (n/2) log n scale over several n",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", help="number of trials")
    p.add_argument("--seed", help="root seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, help="worker threads (default: $PERMLAB_THREADS or 1)")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="permlab", description="Exact experiments on random symmetric permanents.")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name, params in PARAMS.items():
        if name == "report":
            continue
        p = subs.add_parser(name, help=SUMMARIES[name])
        _add_common(p)
        for key, (_, default, help_) in params.items():
            flag = "--" + key.replace("_", "-")
            p.add_argument(flag, dest=key, help=f"{help_} (default {default})")
    rep = subs.add_parser("report", help="pool records of one subcommand into a summary table")
    rep.add_argument("inputs", nargs="+", help="CSV or JSON records")
    rep.add_argument("--out", help="summary CSV path (default: stdout)")
    rep.add_argument("--svg", help="write a chart of median normalized log|per| against n")
    return parser


def _report(args) -> int:
    records = [load_record(p) for p in args.inputs]
    cols, rows = report_summary(records)
    text = table_csv(cols, rows)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.svg:
        if records[0].subcommand != "magnitude-sweep":
            raise ConfigError("--svg needs magnitude-sweep records")
        atomic_write(args.svg, magnitude_svg(rows))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "report":
            return _report(args)
        values = read_config_file(args.config) if args.config else {}
        for key in list(PARAMS[args.subcommand]) + ["trials", "seed"]:
            v = getattr(args, key, None)
            if v is not None:
                values[key] = v
        cfg = ExperimentConfig.build(args.subcommand, values, threads=args.threads, out=args.out, fmt=args.format)
        rec = run_experiment(cfg)
    except (ConfigError, ContractViolation, FileNotFoundError) as exc:
        print(f"permlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not cfg.out:
        sys.stdout.write(rec.to_csv() if cfg.fmt == "csv" else rec.to_json())
    for w in rec.summary.get("warnings", []):
        print(f"permlab: warning: {w}", file=sys.stderr)
    print("permlab: summary: " + json.dumps(rec.metadata["summary"], sort_keys=True), file=sys.stderr)
    if rec.violations:
        for v in rec.violations:
            print(f"permlab: VIOLATION: {v}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
