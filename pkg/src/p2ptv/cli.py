"""Command line: ``p2ptv run`` and ``p2ptv sweep``.

Failures print a single ``error: <Kind>: <message>`` line on stderr and exit
with a nonzero status.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Optional, Sequence

from .config import ParseError, ScenarioConfig, ValidationError, load_config
from .experiment import SWEEP_PARAMS, SweepSpec, run_scenario, run_sweep

EXIT_CONFIG = 3
EXIT_RUN = 4


def _value(text: str) -> Any:
    try:
        return int(text)
    except ValueError:
        return float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="p2ptv", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write CSV outputs")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path, help="output directory (default: [output] dir)")
    run.add_argument("--trace", type=int, metavar="K", help="number of tracked nodes")
    run.add_argument("--events", action="store_true", help="also write events.log")

    sweep = sub.add_parser("sweep", help="sweep one parameter and write sweep.csv")
    sweep.add_argument("--config", required=True, type=Path)
    sweep.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--reps", type=int, default=1)
    sweep.add_argument("--seed", type=int, help="base seed (default: from config)")
    sweep.add_argument("--out", type=Path, help="CSV path (default: <[output] dir>/sweep.csv)")
    sweep.add_argument("--workers", type=int, default=1)
    return parser


def _load(args: argparse.Namespace) -> ScenarioConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if getattr(args, "trace", None) is not None:
        config = config.replace(trace_count=args.trace)
    return config.validate()


def cmd_run(args: argparse.Namespace) -> int:
    config = _load(args)
    started = time.perf_counter()
    result = run_scenario(config, args.out, event_log=args.events)
    elapsed = time.perf_counter() - started
    out = args.out if args.out is not None else Path(config.output_dir)
    if result.summary is None:
        print(f"wrote {out}: no snapshots in the steady window ({elapsed:.1f}s)")
    else:
        s = result.summary
        print(f"mean_dg={s.mean_dg:.6f} mean_ug={s.mean_ug:.6f} snapshots={s.snapshots} ({elapsed:.1f}s) -> {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    try:
        values = tuple(_value(v) for v in args.values.split(",") if v.strip())
    except ValueError as exc:
        raise ValidationError(f"--values: {exc}") from None
    spec = SweepSpec(args.param, values, args.reps, config)
    out = args.out if args.out is not None else Path(config.output_dir) / "sweep.csv"
    rows = run_sweep(spec, workers=args.workers, out_path=out)
    failed = sum(r.error is not None for r in rows)
    for r in rows:
        shown = r.error if r.error is not None else f"mean_dg={r.mean_dg:.6f} mean_ug={r.mean_ug:.6f}"
        print(f"{r.param_name}={r.param_value} rep={r.replication}: {shown}")
    print(f"{len(rows)} rows ({failed} failed) -> {out}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = cmd_run if args.command == "run" else cmd_sweep
    try:
        return handler(args)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
