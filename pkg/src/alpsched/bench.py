"""Benchmark engine: run schedulers over instances, collect metrics, and
produce plot-ready CSV tables.

Wall-clock is measured around the solve call only (parsing and validation
excluded); for reproducible byte-identical reports the timing column can be
zeroed via `timing="off"`.
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import ORACLE_CPS_MAX_N, ORACLE_MAX_N, OracleLimitError
from .core import Instance, Schedule, deviation, runway_throughput, total_cost, validate_schedule
from .dataio import RunReport, RunRow
from .estimators import DrlScheduler, ExactScheduler, FcfsScheduler, TabuScheduler
from .safety import InfeasibleInstanceError

METHODS = ("drl", "fcfs", "tabu", "oracle")


@dataclass
class CompareOutcome:
    report: RunReport
    schedules: dict[tuple[str, str], Schedule] = field(default_factory=dict)
    skips: list[str] = field(default_factory=list)
    infeasible: bool = False


def build_schedulers(
    methods,
    checkpoint=None,
    tabu_iterations: int = 500,
    tabu_tenure: int = 7,
    oracle_cps: int | None = None,
    seed: int = 0,
) -> dict[str, object]:
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
    out: dict[str, object] = {}
    for m in methods:
        if m == "fcfs":
            out[m] = FcfsScheduler()
        elif m == "tabu":
            out[m] = TabuScheduler(tenure=tabu_tenure, max_iterations=tabu_iterations, seed=seed)
        elif m == "oracle":
            out[m] = ExactScheduler(cps=oracle_cps)
        elif m == "drl":
            sched = DrlScheduler(seed=seed)
            if checkpoint is not None:
                sched.load(checkpoint)
            out[m] = sched
    return out


def _solve_oracle_auto(scheduler: ExactScheduler, inst: Instance) -> Schedule:
    """Full oracle up to its size limit, constrained-position-shifting beyond."""
    if scheduler.cps is None and inst.n > ORACLE_MAX_N:
        if inst.n > ORACLE_CPS_MAX_N:
            raise OracleLimitError(f"instance size {inst.n} beyond the oracle's reach")
        return ExactScheduler(cps=2)._solve(inst)
    return scheduler._solve(inst)


def compare(
    instances: list[Instance],
    schedulers: dict[str, object],
    timing: str = "wall",
) -> CompareOutcome:
    """Run every (instance, method) pair; emitted rows are re-validated and
    never carry violations (failures become skips)."""
    outcome = CompareOutcome(report=RunReport(), schedules={})
    for inst in instances:
        for method in sorted(schedulers):
            scheduler = schedulers[method]
            label = inst.name or f"n{inst.n}"
            try:
                start = time.perf_counter()
                if method == "oracle":
                    schedule = _solve_oracle_auto(scheduler, inst)
                else:
                    schedule = scheduler.predict(inst)
                wall_ms = (time.perf_counter() - start) * 1e3
            except OracleLimitError as exc:
                outcome.skips.append(f"{label}/{method}: skipped ({exc})")
                continue
            except InfeasibleInstanceError as exc:
                outcome.skips.append(f"{label}/{method}: infeasible ({exc})")
                outcome.infeasible = True
                continue
            violations = validate_schedule(inst, schedule).count()
            if violations:
                outcome.skips.append(f"{label}/{method}: dropped ({violations} violations)")
                outcome.infeasible = True
                continue
            delays = [deviation(schedule.time_of(a.id), a.target).lateness for a in inst.aircraft]
            outcome.report.add(
                RunRow(
                    instance=label,
                    method=method,
                    n=inst.n,
                    rt=runway_throughput(schedule),
                    total_cost=total_cost(inst, schedule),
                    mean_delay_s=float(np.mean(delays)),
                    p95_delay_s=float(np.percentile(delays, 95)),
                    wall_ms=wall_ms if timing == "wall" else 0.0,
                    violations=0,
                )
            )
            outcome.schedules[(label, method)] = schedule
    return outcome


def with_buffer(inst: Instance, buffer_s: float) -> Instance:
    return replace(inst, buffer_s=buffer_s)


# --- plot data ---------------------------------------------------------------

PLOT_KINDS = ("delay_hist", "sequence", "throughput_bars", "quadrant", "training_curves")


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue().encode()


def delay_hist_csv(schedule_rows: list[dict], bin_width_s: float = 60.0) -> bytes:
    """Histogram of lateness from a schedule table (needs target_s and
    landing_time_s columns); bins are [k*w, (k+1)*w)."""
    if bin_width_s <= 0:
        raise ValueError("bin width must be > 0")
    delays = [max(float(r["landing_time_s"]) - float(r["target_s"]), 0.0) for r in schedule_rows]
    nbins = int(max(delays) // bin_width_s) + 1 if delays else 1
    counts = [0] * nbins
    for d in delays:
        counts[int(d // bin_width_s)] += 1
    rows = [(_num(k * bin_width_s), c) for k, c in enumerate(counts)]
    return _csv_bytes(("bin_start_s", "count"), rows)


def sequence_csv(schedule_rows: list[dict]) -> bytes:
    """Landing sequence sorted by time: id, wake, landing_time_s."""
    ordered = sorted(schedule_rows, key=lambda r: (float(r["landing_time_s"]), int(r["id"])))
    rows = [(r["id"], r["wake"], r["landing_time_s"]) for r in ordered]
    return _csv_bytes(("id", "wake", "landing_time_s"), rows)


def throughput_bars_csv(report: RunReport) -> bytes:
    rows = [(r.instance, r.method, r.rt) for r in report.sorted_rows()]
    return _csv_bytes(("instance", "method", "rt"), rows)


def quadrant_csv(report: RunReport) -> bytes:
    """One row per method: mean runway throughput vs mean wall-clock."""
    by_method: dict[str, list[RunRow]] = {}
    for row in report.rows:
        by_method.setdefault(row.method, []).append(row)
    rows = []
    for method in sorted(by_method):
        rs = by_method[method]
        rows.append(
            (method, _num(np.mean([r.rt for r in rs])), _num(np.mean([r.wall_ms for r in rs])))
        )
    return _csv_bytes(("method", "mean_rt", "mean_wall_ms"), rows)


def training_curves_csv(log_rows: list[dict]) -> bytes:
    cols = ("episode", "reward", "cost", "avg_delay_s", "epsilon")
    rows = [tuple(r[c] for c in cols) for r in log_rows]
    return _csv_bytes(cols, rows)


def _num(x) -> str:
    return repr(float(x))
