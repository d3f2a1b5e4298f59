"""Command-line entry point: train, compare, plotdata.

Exit codes: 0 success, 2 usage error, 3 data error, 4 infeasible instance.
Set ALPSCHED_LOG=debug|info|warning to control verbosity.
"""
from __future__ import annotations

import argparse
import csv
import glob as globmod
import io
import logging
import os
import sys

from . import bench
from .config import ConfigError, load_config, synth_kwargs_from, train_config_from
from .core import Instance
from .dataio import ParseError, ScenarioSpec, parse_ikli_csv, parse_orlibrary, synthesize, write_report
from .training import Trainer

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4

log = logging.getLogger("alpsched")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _setup_logging() -> None:
    level = os.environ.get("ALPSCHED_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(message)s")


def _parse_synth_spec(text: str, defaults: dict) -> list[ScenarioSpec]:
    """Parse synth:<...> specs: either a size list ("synth:5,10") or
    key=value pairs ("synth:n=30,count=50,seed=7")."""
    body = text.split(":", 1)[1]
    if "=" not in body:
        sizes = [int(v) for v in body.split(",") if v.strip()]
        return [ScenarioSpec(count=n, **defaults) for n in sizes]
    fields = dict(part.split("=", 1) for part in body.split(","))
    n = int(fields.pop("n"))
    count = int(fields.pop("count", "1"))
    seed = int(fields.pop("seed", "0"))
    kwargs = dict(defaults)
    if "rate" in fields:
        kwargs["arrival_rate"] = float(fields.pop("rate"))
    if "hour" in fields:
        kwargs["hour"] = int(fields.pop("hour"))
    if fields:
        raise CliError(f"unknown synth fields {sorted(fields)}", EXIT_USAGE)
    return [ScenarioSpec(count=n, seed=seed + k, **kwargs) for k in range(count)]


def _load_instance(path: str, buffer_s: float | None) -> Instance:
    try:
        if path.endswith(".csv"):
            return parse_ikli_csv(path, buffer_s=buffer_s)
        return parse_orlibrary(path, buffer_s=buffer_s)
    except FileNotFoundError:
        raise CliError(f"no such instance file: {path}", EXIT_DATA) from None
    except ParseError as exc:
        raise CliError(str(exc), EXIT_DATA) from None


def _gather_instances(pattern: str, buffer_s: float | None, synth_defaults: dict) -> list[Instance]:
    if pattern.startswith("synth:"):
        specs = _parse_synth_spec(pattern, synth_defaults)
        instances = [synthesize(s) for s in specs]
        if buffer_s is not None:
            instances = [bench.with_buffer(i, buffer_s) for i in instances]
        return instances
    paths = sorted(globmod.glob(pattern)) or ([pattern] if os.path.exists(pattern) else [])
    if not paths:
        raise CliError(f"no instances match {pattern!r}", EXIT_DATA)
    return [_load_instance(p, buffer_s) for p in paths]


# --- train -------------------------------------------------------------------

def _cmd_train(args) -> int:
    try:
        values = load_config(args.config)
    except FileNotFoundError:
        raise CliError(f"no such config file: {args.config}", EXIT_USAGE) from None
    except ConfigError as exc:
        raise CliError(f"bad config: {exc}", EXIT_USAGE) from None
    cfg = train_config_from(values, seed=args.seed, episodes=args.episodes)
    synth_defaults = synth_kwargs_from(values)

    if args.data.startswith("synth:"):
        data = _parse_synth_spec(args.data, {**synth_defaults, "seed": cfg.seed})
    else:
        data = [_load_instance(p, None) for p in sorted(globmod.glob(args.data)) or [args.data]]

    log.info("training on %d scenario(s), %d episodes each", len(data), cfg.episodes_per_scenario)
    trainer = Trainer(cfg)
    policy, train_log = trainer.train(data)

    from .training import save_policy

    save_policy(policy, args.out)
    log_path = args.log or (args.out + ".log.csv")
    with open(log_path, "wb") as fh:
        fh.write(train_log.to_csv_bytes())
    log.info("checkpoint written to %s, log to %s", args.out, log_path)
    return EXIT_OK


# --- compare -----------------------------------------------------------------

def _cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise CliError("no methods given", EXIT_USAGE)
    if "drl" in methods and not args.checkpoint:
        raise CliError("method 'drl' requires --checkpoint", EXIT_USAGE)
    try:
        schedulers = bench.build_schedulers(
            methods,
            checkpoint=args.checkpoint,
            tabu_iterations=args.tabu_iterations,
            oracle_cps=args.oracle_cps,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None

    instances = _gather_instances(args.instances, args.buffer, {})
    outcome = bench.compare(instances, schedulers, timing=args.timing)

    payload = write_report(outcome.report, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload.decode())

    if args.schedules:
        os.makedirs(args.schedules, exist_ok=True)
        from .dataio import write_schedule

        by_label = {inst.name or f"n{inst.n}": inst for inst in instances}
        for (label, method), schedule in outcome.schedules.items():
            out_path = os.path.join(args.schedules, f"{label}_{method}.csv")
            with open(out_path, "wb") as fh:
                fh.write(write_schedule(by_label[label], schedule))

    for line in outcome.skips:
        print(line, file=sys.stderr)
    return EXIT_INFEASIBLE if outcome.infeasible else EXIT_OK


# --- plotdata ----------------------------------------------------------------

def _read_csv_rows(path: str) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except FileNotFoundError:
        raise CliError(f"no such file: {path}", EXIT_DATA) from None


def _cmd_plotdata(args) -> int:
    kind = args.kind
    if kind not in bench.PLOT_KINDS:
        raise CliError(f"unknown kind {kind!r}; choose from {bench.PLOT_KINDS}", EXIT_USAGE)
    if kind in ("delay_hist", "sequence"):
        rows = _read_csv_rows(args.infile)
        payload = (
            bench.delay_hist_csv(rows, args.bin) if kind == "delay_hist" else bench.sequence_csv(rows)
        )
    elif kind in ("throughput_bars", "quadrant"):
        from .dataio import read_report

        with open(args.infile, "rb") as fh:
            report = read_report(fh.read(), "csv")
        payload = bench.throughput_bars_csv(report) if kind == "throughput_bars" else bench.quadrant_csv(report)
    else:  # training_curves
        payload = bench.training_curves_csv(_read_csv_rows(args.infile))
    with open(args.out, "wb") as fh:
        fh.write(payload)
    return EXIT_OK


# --- argument plumbing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alpsched",
        description="Runway landing scheduling: train, benchmark, and export plot data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a scheduler and write a checkpoint")
    p_train.add_argument("--data", required=True, help="instance file/glob or synth:<sizes>")
    p_train.add_argument("--config", required=True, help="key = value config file")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--episodes", type=int, default=None, help="override episodes per scenario")
    p_train.add_argument("--log", default=None, help="training log CSV path")
    p_train.set_defaults(func=_cmd_train)

    p_cmp = sub.add_parser("compare", help="run methods over instances and emit a report")
    p_cmp.add_argument("--instances", required=True, help="file glob or synth:<spec>")
    p_cmp.add_argument("--methods", required=True, help=f"comma list from {bench.METHODS}")
    p_cmp.add_argument("--checkpoint", default=None)
    p_cmp.add_argument("--buffer", type=float, default=None, help="override the safety buffer (s)")
    p_cmp.add_argument("--out", default=None, help="report path (stdout when omitted)")
    p_cmp.add_argument("--format", choices=("csv", "json"), default="csv")
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--timing", choices=("wall", "off"), default="wall",
                       help="'off' zeroes wall_ms for byte-reproducible reports")
    p_cmp.add_argument("--schedules", default=None, help="directory for per-run schedule CSVs")
    p_cmp.add_argument("--tabu-iterations", type=int, default=500)
    p_cmp.add_argument("--oracle-cps", type=int, default=None)
    p_cmp.set_defaults(func=_cmd_compare)

    p_plot = sub.add_parser("plotdata", help="derive plot-ready CSV tables")
    p_plot.add_argument("--in", dest="infile", required=True)
    p_plot.add_argument("--kind", required=True, help=f"one of {bench.PLOT_KINDS}")
    p_plot.add_argument("--out", required=True)
    p_plot.add_argument("--bin", type=float, default=60.0, help="delay_hist bin width (s)")
    p_plot.set_defaults(func=_cmd_plotdata)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.code == EXIT_USAGE:
            parser.print_usage(sys.stderr)
        return exc.code
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
