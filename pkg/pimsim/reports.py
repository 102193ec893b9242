from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence, TypedDict

from django.db.models import Max

from .models import SimulationRun
from .scheduler import ComparisonReport, Metrics, Timeline

TIMELINE_HEADER = ('resource', 'start_ns', 'end_ns', 'tag', 'node_id')
COMPARISON_HEADER = ('mechanism', 'makespan_ns', 'transfer_energy_uj',
                     'speedup_pct', 'energy_saving_pct')
PRECISION = 6


class MetricsSummary(TypedDict):
    """Serialized metrics of one platform's run."""

    makespan_ns: float
    transfer_energy_uj: float
    stall_ns: float
    nop_ns: float
    subarray_utilization: float
    move_count: int
    compute_count: int
    lower_bound_ns: float
    speedup_pct: float
    energy_saving_pct: float


class ComparisonSummary(TypedDict):
    benchmark: str
    baseline: str
    platforms: dict[str, MetricsSummary]


class BenchmarkSpeedup(TypedDict):
    """Latest archived result of a mechanism on a benchmark."""

    benchmark: str
    size: int
    mechanism: str
    makespan_ns: float
    speedup_pct: float
    energy_saving_pct: float
    recorded_at: str


def _fixed(value: float) -> float:
    return round(value, PRECISION)


def metrics_summary(result: Metrics, speedup_pct: float = 0.0,
                    energy_saving_pct: float = 0.0) -> MetricsSummary:
    return MetricsSummary(
        makespan_ns=_fixed(result.makespan_ns),
        transfer_energy_uj=_fixed(result.transfer_energy_uj),
        stall_ns=_fixed(result.stall_ns),
        nop_ns=_fixed(result.nop_ns),
        subarray_utilization=_fixed(result.subarray_utilization),
        move_count=result.move_count,
        compute_count=result.compute_count,
        lower_bound_ns=_fixed(result.lower_bound_ns),
        speedup_pct=_fixed(speedup_pct),
        energy_saving_pct=_fixed(energy_saving_pct),
    )


def comparison_summary(report: ComparisonReport) -> ComparisonSummary:
    return ComparisonSummary(
        benchmark=report.label,
        baseline=report.baseline.value,
        platforms={
            row.mechanism.value: metrics_summary(
                row.metrics, row.speedup_pct, row.energy_saving_pct)
            for row in report.rows
        },
    )


def write_json(path: Path, payload: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + '\n',
                    encoding='utf-8')


def _write_csv(path: Path, header: Sequence[str],
               rows: Iterable[Sequence[object]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)


def timeline_rows(timeline: Timeline, prefix: str = ''
                  ) -> list[tuple[object, ...]]:
    return [
        (f'{prefix}{item.resource}', _fixed(item.start_ns),
         _fixed(item.end_ns), item.tag.value,
         '' if item.node_id is None else item.node_id)
        for item in timeline.intervals
    ]


def write_timeline_csv(path: Path, report: ComparisonReport) -> None:
    """Every platform's intervals, resources prefixed by mechanism."""
    rows: list[tuple[object, ...]] = []
    for row in report.rows:
        rows += timeline_rows(row.timeline, f'{row.mechanism.value}:')
    _write_csv(path, TIMELINE_HEADER, rows)


def comparison_rows(report: ComparisonReport) -> list[tuple[object, ...]]:
    return [
        (row.mechanism.value, _fixed(row.metrics.makespan_ns),
         _fixed(row.metrics.transfer_energy_uj), _fixed(row.speedup_pct),
         _fixed(row.energy_saving_pct))
        for row in report.rows
    ]


def write_comparison_csv(path: Path,
                         rows: Iterable[Sequence[object]]) -> None:
    _write_csv(path, COMPARISON_HEADER, rows)


def write_plot_csv(path: Path, mechanisms: Sequence[str],
                   points: Iterable[tuple[object, dict[str, float]]]
                   ) -> None:
    """x column first, then one y column per mechanism."""
    _write_csv(path, ('x', *mechanisms), [
        (x, *(_fixed(values[name]) for name in mechanisms))
        for x, values in points
    ])


def get_benchmark_speedups(benchmark: str | None = None
                           ) -> list[BenchmarkSpeedup]:
    """
    Latest archived run per (benchmark, size, mechanism).

    Args:
        benchmark: Optional benchmark name to restrict the results to.
    """
    runs = SimulationRun.objects.all()
    if benchmark:
        runs = runs.filter(benchmark=benchmark)

    latest_ids = (runs.values('benchmark', 'size', 'mechanism')
                  .annotate(latest=Max('id')).values_list('latest',
                                                          flat=True))

    return [
        BenchmarkSpeedup(
            benchmark=run.benchmark,
            size=run.size,
            mechanism=run.mechanism,
            makespan_ns=run.makespan_ns,
            speedup_pct=run.speedup_pct,
            energy_saving_pct=run.energy_saving_pct,
            recorded_at=run.created_at.isoformat(),
        )
        for run in SimulationRun.objects.filter(
            pk__in=list(latest_ids)).order_by('benchmark', 'size',
                                              'mechanism')
    ]


ACCEPTANCE_HEADER = ('check', 'measured', 'target', 'tolerance', 'passed')


def write_acceptance_csv(path: Path, checks: Iterable[object]) -> None:
    _write_csv(path, ACCEPTANCE_HEADER, [
        (check.name, _fixed(check.measured), check.target, check.tolerance,
         'pass' if check.passed else 'FAIL')
        for check in checks
    ])
