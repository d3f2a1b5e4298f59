"""Instance file parsing, scenario synthesis, and report/schedule serialization.

Two on-disk instance formats are supported:

* the airport CSV format (header row; fields sr, mdl, cat, sta, ata and the
  four tier cost coefficients), where the landing window is derived from the
  scheduled arrival as [sta - window_before, sta + window_after];
* the classic OR-Library "airland" whitespace format (count + freeze time,
  then per aircraft: appearance, E, T, L, early penalty, late penalty and a
  full row of pairwise separations).

Everything here is pure and re-entrant: parsing returns immutable instances,
synthesis is a deterministic function of its spec.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Aircraft,
    CostProfile,
    Instance,
    Schedule,
    SeparationMatrix,
    WakeClass,
)

DEFAULT_WINDOW_BEFORE_S = 600.0
DEFAULT_WINDOW_AFTER_S = 900.0

#: Default header spellings for the airport CSV columns; override per call if
#: a file uses different names.
IKLI_COLUMNS = {
    "id": "sr",
    "model": "mdl",
    "wake": "cat",
    "sta": "sta",
    "ata": "ata",
    "c300": "cost_300",
    "c900": "cost_900",
    "c1800": "cost_1800",
    "c3600": "cost_3600",
}


class ParseError(ValueError):
    """Malformed instance/report file; carries the offending row when known."""


def _fail(path, row, message) -> ParseError:
    where = f"{path}, row {row}" if row is not None else str(path)
    return ParseError(f"{where}: {message}")


def parse_ikli_csv(
    path,
    window_before: float = DEFAULT_WINDOW_BEFORE_S,
    window_after: float = DEFAULT_WINDOW_AFTER_S,
    columns: dict[str, str] | None = None,
    buffer_s: float | None = None,
) -> Instance:
    """Parse an airport-format CSV into an Instance.

    Per aircraft: target = sta, window = [max(sta - window_before, 0),
    sta + window_after], wake parsed from the category letter, and the default
    class separation matrix attached.
    """
    cols = dict(IKLI_COLUMNS)
    cols.update(columns or {})
    with open(path, newline="") as fh:
        aircraft = _read_ikli_rows(fh, path, cols, window_before, window_after)
    kwargs = {} if buffer_s is None else {"buffer_s": buffer_s}
    return Instance(aircraft=tuple(aircraft), name=_stem(path), **kwargs)


def _read_ikli_rows(fh, path, cols, window_before, window_after) -> list[Aircraft]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        raise _fail(path, None, "empty file (missing header)")
    header = {name.strip() for name in reader.fieldnames}
    required = [cols[k] for k in ("id", "wake", "sta", "c300", "c900", "c1800", "c3600")]
    missing = [c for c in required if c not in header]
    if missing:
        raise _fail(path, None, f"missing columns {missing}")

    out = []
    row_idx = 0
    for row in reader:
        row_idx += 1
        row = {(k or "").strip(): (v or "").strip() for k, v in row.items()}

        def num(key, kind=float):
            raw = row.get(cols[key], "")
            try:
                return kind(raw)
            except (TypeError, ValueError):
                raise _fail(path, row_idx, f"malformed {cols[key]} value {raw!r}") from None

        try:
            wake = WakeClass.from_letter(row.get(cols["wake"], ""))
        except ValueError as exc:
            raise _fail(path, row_idx, str(exc)) from None
        sta = num("sta")
        ata = num("ata") if cols["ata"] in header else sta
        try:
            profile = CostProfile(num("c300"), num("c900"), num("c1800"), num("c3600"))
            out.append(
                Aircraft(
                    id=num("id", int),
                    model=row.get(cols["model"], ""),
                    wake=wake,
                    target=sta,
                    ata=ata,
                    earliest=max(sta - window_before, 0.0),
                    latest=sta + window_after,
                    cost=profile,
                )
            )
        except ValueError as exc:
            raise _fail(path, row_idx, str(exc)) from None
    if not out:
        raise _fail(path, None, "no aircraft rows")
    return out


def parse_orlibrary(path, buffer_s: float | None = None) -> Instance:
    """Parse an OR-Library airland file.

    Cost profiles become constant-rate lateness profiles with a separate
    earliness rate; pairwise separations are kept as a full n x n override of
    the class matrix (the diagonal self-pair entries are ignored).  The freeze
    time is parsed and discarded (static problem).
    """
    with open(path) as fh:
        tokens = fh.read().split()
    pos = 0

    def take(kind=float, what="value"):
        nonlocal pos
        if pos >= len(tokens):
            raise _fail(path, None, f"truncated file while reading {what}")
        raw = tokens[pos]
        pos += 1
        try:
            return kind(raw)
        except ValueError:
            raise _fail(path, None, f"malformed {what} {raw!r}") from None

    n = take(int, "aircraft count")
    if n < 1:
        raise _fail(path, None, f"aircraft count must be >= 1, got {n}")
    take(float, "freeze time")  # unused: static problem

    aircraft = []
    seps = np.zeros((n, n), dtype=float)
    for i in range(n):
        appearance = take(what=f"appearance time of aircraft {i}")
        earliest = take(what=f"earliest time of aircraft {i}")
        target = take(what=f"target time of aircraft {i}")
        latest = take(what=f"latest time of aircraft {i}")
        early_pen = take(what=f"early penalty of aircraft {i}")
        late_pen = take(what=f"late penalty of aircraft {i}")
        if early_pen < 0 or late_pen < 0:
            raise _fail(path, None, f"negative penalty for aircraft {i}")
        try:
            aircraft.append(
                Aircraft(
                    id=i,
                    wake=WakeClass.MEDIUM,  # format carries no wake class; pairwise matrix governs
                    target=target,
                    ata=appearance,
                    earliest=earliest,
                    latest=latest,
                    cost=CostProfile.from_linear(early_pen, late_pen),
                )
            )
        except ValueError as exc:
            raise _fail(path, None, f"aircraft {i}: {exc}") from None
        for j in range(n):
            seps[i, j] = take(what=f"separation ({i},{j})")
    if pos != len(tokens):
        raise _fail(path, None, f"{len(tokens) - pos} trailing tokens")

    np.fill_diagonal(seps, 0.0)
    kwargs = {} if buffer_s is None else {"buffer_s": buffer_s}
    return Instance(
        aircraft=tuple(aircraft),
        pair_separation=tuple(tuple(row) for row in seps),
        name=_stem(path),
        **kwargs,
    )


def _stem(path) -> str:
    base = str(path).replace("\\", "/").rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[0] if "." in base else base


@dataclass(frozen=True)
class ScenarioSpec:
    """Deterministic recipe for a synthetic instance.

    `hour` labels the start of the traffic interval (landing times are offset
    by hour*3600), `arrival_rate` is arrivals per second (mean inter-arrival
    = 1/rate).  The same spec always synthesizes the same instance.
    """

    count: int
    seed: int = 0
    hour: int = 7
    arrival_rate: float = 1.0 / 90.0
    window_before: float = DEFAULT_WINDOW_BEFORE_S
    window_after: float = DEFAULT_WINDOW_AFTER_S
    wake_mix: tuple[float, float, float] = (0.2, 0.6, 0.2)  # H/M/L shares
    cost_ranges: tuple[tuple[float, float], ...] = (
        (0.3, 1.0),
        (1.0, 3.0),
        (2.0, 6.0),
        (5.0, 15.0),
    )
    buffer_s: float = 30.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.arrival_rate <= 0:
            raise ValueError("arrival rate must be > 0")
        if abs(sum(self.wake_mix) - 1.0) > 1e-9:
            raise ValueError("wake mix must sum to 1")


def synthesize(spec: ScenarioSpec) -> Instance:
    """Build a synthetic instance: exponential inter-arrivals, the configured
    wake mix, uniform per-tier cost draws, and windows from the before/after
    rule."""
    rng = np.random.default_rng(spec.seed)
    gaps = rng.exponential(1.0 / spec.arrival_rate, size=spec.count)
    stas = spec.hour * 3600.0 + np.cumsum(gaps)
    wakes = rng.choice(3, size=spec.count, p=spec.wake_mix)
    atas = stas + rng.normal(0.0, 30.0, size=spec.count)

    aircraft = []
    for k in range(spec.count):
        rates = [rng.uniform(lo, hi) for lo, hi in spec.cost_ranges]
        sta = float(stas[k])
        aircraft.append(
            Aircraft(
                id=k + 1,
                wake=WakeClass(int(wakes[k])),
                target=sta,
                ata=max(float(atas[k]), 0.0),
                earliest=max(sta - spec.window_before, 0.0),
                latest=sta + spec.window_after,
                cost=CostProfile(*rates),
            )
        )
    name = f"alp_{spec.hour}_{spec.count}_seed{spec.seed}"
    return Instance(aircraft=tuple(aircraft), buffer_s=spec.buffer_s, name=name)


# --- run reports -----------------------------------------------------------

REPORT_FIELDS = (
    "instance",
    "method",
    "n",
    "rt",
    "total_cost",
    "mean_delay_s",
    "p95_delay_s",
    "wall_ms",
    "violations",
    "note",
)


@dataclass(frozen=True)
class RunRow:
    """Metrics for one (instance, method) solve."""

    instance: str
    method: str
    n: int
    rt: int
    total_cost: float
    mean_delay_s: float
    p95_delay_s: float
    wall_ms: float
    violations: int = 0
    note: str = ""


@dataclass
class RunReport:
    rows: list[RunRow] = field(default_factory=list)

    def add(self, row: RunRow) -> None:
        self.rows.append(row)

    def sorted_rows(self) -> list[RunRow]:
        return sorted(self.rows, key=lambda r: (r.instance, r.method))


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def write_report(report: RunReport, format: str = "csv") -> bytes:
    """Serialize a report with a stable field order; round-trips through
    `read_report`."""
    rows = report.sorted_rows()
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        for r in rows:
            writer.writerow([_fmt(getattr(r, f)) for f in REPORT_FIELDS])
        return buf.getvalue().encode()
    if format == "json":
        payload = [{f: getattr(r, f) for f in REPORT_FIELDS} for r in rows]
        return (json.dumps(payload, indent=2, sort_keys=False) + "\n").encode()
    raise ValueError(f"unknown report format {format!r}")


def read_report(data: bytes, format: str = "csv") -> RunReport:
    report = RunReport()
    if format == "csv":
        reader = csv.DictReader(io.StringIO(data.decode()))
        if reader.fieldnames is None:
            return report
        if tuple(reader.fieldnames) != REPORT_FIELDS:
            raise ParseError(f"unexpected report header {reader.fieldnames}")
        records = list(reader)
    elif format == "json":
        records = json.loads(data.decode())
    else:
        raise ValueError(f"unknown report format {format!r}")
    for rec in records:
        report.add(
            RunRow(
                instance=str(rec["instance"]),
                method=str(rec["method"]),
                n=int(rec["n"]),
                rt=int(rec["rt"]),
                total_cost=float(rec["total_cost"]),
                mean_delay_s=float(rec["mean_delay_s"]),
                p95_delay_s=float(rec["p95_delay_s"]),
                wall_ms=float(rec["wall_ms"]),
                violations=int(rec["violations"]),
                note=str(rec["note"]),
            )
        )
    return report


# --- schedules -------------------------------------------------------------

def write_schedule(inst: Instance, schedule: Schedule) -> bytes:
    """Schedule CSV ordered by landing time: id, wake, target_s, landing_time_s."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "wake", "target_s", "landing_time_s"])
    for aid in schedule.order():
        a = inst.by_id(aid)
        writer.writerow([aid, a.wake.letter, _fmt(a.target), _fmt(schedule.time_of(aid))])
    return buf.getvalue().encode()


def read_schedule(data: bytes) -> Schedule:
    reader = csv.DictReader(io.StringIO(data.decode()))
    times = {}
    for rec in reader:
        times[int(rec["id"])] = float(rec["landing_time_s"])
    if not times:
        raise ParseError("schedule file has no rows")
    return Schedule(times)
