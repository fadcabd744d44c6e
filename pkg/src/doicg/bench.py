"""Benchmark sweeps: per-run records, speedup tables and aggregate gap traces."""

from __future__ import annotations

import csv
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .doi import DoiConfig, Variant
from .driver import RunParams, extract_gap_trace, run, trace_csv
from .instance import Instance, scale_capacities

RESULT_HEADER = ("instance", "L", "variant", "time_s", "iterations", "z", "converged", "pool_size")
VARIANT_ORDER = (Variant.NONE, Variant.S, Variant.F, Variant.SF)


@dataclass(frozen=True)
class BenchRecord:
    instance: str
    variant: Variant
    time_s: float
    iterations: int
    z: float
    converged: bool
    L: int = 1
    pool_size: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.time_s >= 0:
            raise ValueError(f"negative or undefined time for {self.instance}/{self.variant.value}")

    def row(self) -> list:
        return [
            self.instance,
            self.L,
            self.variant.value,
            repr(float(self.time_s)),
            self.iterations,
            repr(float(self.z)),
            int(self.converged),
            self.pool_size,
        ]


@dataclass
class SpeedupRow:
    instance: str
    times: dict[Variant, float]
    speedups: dict[Variant, float]
    flagged: frozenset = frozenset()  # variants whose run did not converge


@dataclass
class SpeedupTable:
    variants: tuple[Variant, ...]
    baseline: Variant
    rows: list[SpeedupRow]
    mean: SpeedupRow
    median: SpeedupRow

    @property
    def others(self) -> tuple[Variant, ...]:
        return tuple(v for v in self.variants if v is not self.baseline)

    def header(self) -> list[str]:
        return (
            ["instance"]
            + [f"time_{v.value}" for v in self.variants]
            + [f"speedup_{v.value}" for v in self.others]
        )

    def _cells(self, row: SpeedupRow, fmt) -> list[str]:
        out = []
        for v in self.variants:
            mark = "*" if v in row.flagged else ""
            out.append(fmt(row.times[v]) + mark)
        for v in self.others:
            mark = "*" if v in row.flagged or self.baseline in row.flagged else ""
            out.append(fmt(row.speedups[v]) + mark)
        return out

    def to_csv(self) -> str:
        """Full precision; summary rows last."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self.rows + [self.mean, self.median]:
            w.writerow([row.instance] + self._cells(row, lambda x: repr(float(x))))
        return buf.getvalue()

    def render(self) -> str:
        """Plain-text table with one decimal, like a printed runtime table."""
        body = [self.header()]
        for row in self.rows + [self.mean, self.median]:
            body.append([row.instance] + self._cells(row, lambda x: f"{x:.1f}"))
        widths = [max(len(r[k]) for r in body) for k in range(len(body[0]))]
        lines = ["  ".join(c.rjust(wd) for c, wd in zip(r, widths)) for r in body]
        lines.insert(1, "-" * len(lines[0]))
        lines.insert(len(lines) - 2, "-" * len(lines[0]))
        if any(r.flagged for r in self.rows):
            lines.append("* run did not converge")
        return "\n".join(lines) + "\n"


def speedup_table(records: Iterable[BenchRecord], baseline: Variant = Variant.NONE) -> SpeedupTable:
    """Speedups ``t_baseline / t_v`` per instance, plus exact mean and median rows.

    Summary speedups are the mean and median of the per-instance speedups,
    not ratios of the summary times.
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    baseline = Variant(baseline)
    grid: dict[tuple[str, Variant], BenchRecord] = {}
    for rec in records:
        key = (rec.instance, rec.variant)
        if key in grid:
            raise ValueError(f"duplicate record for {key[0]}/{key[1].value}")
        grid[key] = rec
    instances = sorted({r.instance for r in records})
    present = {r.variant for r in records} | {baseline}
    variants = tuple(v for v in VARIANT_ORDER if v in present)
    missing = [(i, v.value) for i in instances for v in variants if (i, v) not in grid]
    if missing:
        raise ValueError(f"missing grid cells: {missing}")

    rows = []
    for name in instances:
        times = {v: grid[(name, v)].time_s for v in variants}
        base = times[baseline]
        speedups = {v: _ratio(base, times[v]) for v in variants if v is not baseline}
        flagged = frozenset(v for v in variants if not grid[(name, v)].converged)
        rows.append(SpeedupRow(name, times, speedups, flagged))

    def summary(label, fn):
        return SpeedupRow(
            label,
            {v: fn([r.times[v] for r in rows]) for v in variants},
            {v: fn([r.speedups[v] for r in rows]) for v in variants if v is not baseline},
        )

    return SpeedupTable(
        variants, baseline, rows, summary("mean", statistics.fmean), summary("median", statistics.median)
    )


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


def records_csv(records: Iterable[BenchRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_HEADER)
    for rec in sort_records(records):
        w.writerow(rec.row())
    return buf.getvalue()


def sort_records(records: Iterable[BenchRecord]) -> list[BenchRecord]:
    return sorted(records, key=lambda r: (r.instance, VARIANT_ORDER.index(r.variant), r.L))


# ---------------------------------------------------------------------------
# gap aggregation


@dataclass
class GapSeries:
    """Relative gap trace of one run: parallel lists of (time, iteration, gap)."""

    instance: str
    variant: Variant
    L: int
    points: list[tuple[float, int, float]]

    def gap_at_iteration(self, k: int) -> float:
        # a finished run keeps its final gap
        idx = min(k, len(self.points)) - 1
        return self.points[idx][2]

    def gap_at_time(self, t: float) -> float:
        last = self.points[0][2]
        for time_s, _, g in self.points:
            if time_s > t:
                break
            last = g
        return last


def aggregate_by_iteration(series: Sequence[GapSeries]) -> list[tuple[int, Variant, int, float]]:
    """Mean gap across instances at every iteration, per (L, variant)."""
    out = []
    for (L, variant), group in _groups(series):
        horizon = max(len(s.points) for s in group)
        for k in range(1, horizon + 1):
            out.append((L, variant, k, statistics.fmean(s.gap_at_iteration(k) for s in group)))
    return out


def aggregate_by_time(series: Sequence[GapSeries], n_points: int = 100) -> list[tuple[int, Variant, float, float]]:
    """Mean gap across instances on an even time grid, per (L, variant)."""
    out = []
    for (L, variant), group in _groups(series):
        horizon = max(s.points[-1][0] for s in group)
        for k in range(n_points + 1):
            t = horizon * k / n_points
            out.append((L, variant, t, statistics.fmean(s.gap_at_time(t) for s in group)))
    return out


def _groups(series: Sequence[GapSeries]):
    keys = sorted({(s.L, VARIANT_ORDER.index(s.variant)) for s in series})
    for L, vi in keys:
        v = VARIANT_ORDER[vi]
        yield (L, v), [s for s in series if s.L == L and s.variant is v]


def _aggregate_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for L, v, x, g in rows:
        w.writerow([L, v.value, x if isinstance(x, int) else repr(float(x)), repr(float(g))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class BenchOutcome:
    records: list[BenchRecord]
    table: SpeedupTable
    series: list[GapSeries] = field(repr=False)
    z_mismatches: list[str] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def _task(args) -> tuple[BenchRecord, GapSeries, str]:
    instance, L, variant, config, params = args
    scaled = scale_capacities(instance, L)
    cfg = DoiConfig(
        variant,
        n_quantiles=config.n_quantiles,
        swap_fraction=config.swap_fraction,
        update_iterations=config.update_iterations,
        update_every=config.update_every,
    )
    res = run(scaled, cfg, params)
    rec = BenchRecord(
        scaled.name, cfg.variant, res.wall_time, res.iterations, res.z, res.converged, L, res.pool_size
    )
    series = GapSeries(scaled.name, cfg.variant, L, extract_gap_trace(res))
    return rec, series, trace_csv(res)


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def run_bench(
    instances: Sequence[Instance],
    variants: Sequence[Variant] = VARIANT_ORDER,
    Ls: Sequence[int] = (1,),
    config: DoiConfig | None = None,
    params: RunParams | None = None,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> BenchOutcome:
    """Run every instance x L x variant; results are sorted before any output."""
    config = config or DoiConfig()
    params = params or RunParams()
    variants = [Variant(v) for v in variants]
    names = [inst.name for inst in instances]
    if len(set(names)) != len(names):
        raise ValueError("instance names must be distinct")
    tasks = [(inst, int(L), v, config, params) for inst in instances for L in Ls for v in variants]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    results.sort(key=lambda r: (r[0].instance, VARIANT_ORDER.index(r[0].variant), r[0].L))
    records = [r[0] for r in results]
    series = [r[1] for r in results]

    baseline = Variant.NONE if Variant.NONE in variants else variants[0]
    table = speedup_table(records, baseline)
    mismatches = cross_variant_mismatches(records, baseline)
    outcome = BenchOutcome(records, table, series, mismatches)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        def put(name: str, text: str) -> None:
            path = out / name
            path.write_text(text, encoding="utf-8", newline="\n")
            outcome.files.append(path)

        put("results.csv", records_csv(records))
        put("speedup.csv", table.to_csv())
        for rec, _, text in results:
            put(f"trace_{_safe(rec.instance)}_{rec.variant.value}.csv", text)
        put(
            "aggregate_gap_time.csv",
            _aggregate_csv(("L", "variant", "time_s", "mean_gap"), aggregate_by_time(series)),
        )
        put(
            "aggregate_gap_iter.csv",
            _aggregate_csv(("L", "variant", "iteration", "mean_gap"), aggregate_by_iteration(series)),
        )
    return outcome


def cross_variant_mismatches(records: Iterable[BenchRecord], baseline: Variant = Variant.NONE, tol: float = 1e-6) -> list[str]:
    """Converged runs whose z differs from the baseline run on the same instance."""
    ref = {r.instance: r for r in records if r.variant is baseline and r.converged}
    out = []
    for r in records:
        base = ref.get(r.instance)
        if base is None or r is base or not r.converged:
            continue
        if abs(r.z - base.z) > tol * max(1.0, abs(base.z)):
            out.append(f"{r.instance}/{r.variant.value}: z={r.z!r} vs {baseline.value} z={base.z!r}")
    return out
