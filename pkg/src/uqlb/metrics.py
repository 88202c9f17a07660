"""Schedule metrics: makespan, CPU time, scheduling overhead, SLR, boxplot stats.

Overhead is makespan minus aggregate CPU time and deliberately includes queue
wait.  Records with a zero makespan but nonzero CPU time are treated as
having zero scheduler overhead, with the makespan reported as the CPU time
(coarse-log correction).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

from .errors import EmptyRecords, ZeroComputeTime

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TaskRecord:
    task_id: int
    submit_t: float
    start_t: float
    end_t: float
    cpu_time: float

    def __post_init__(self):
        if not (self.submit_t <= self.start_t <= self.end_t):
            raise ValueError("timestamps must satisfy submit <= start <= end")
        if self.cpu_time < 0:
            raise ValueError("cpu_time must be >= 0")

    CSV_HEADER = ("task_id", "submit_t", "start_t", "end_t", "cpu_time")


@dataclass(frozen=True)
class BoxStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple = ()


@dataclass(frozen=True)
class MetricsSummary:
    makespan: float
    total_cpu: float
    overhead: float
    slr: float
    per_task: tuple = ()
    box: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "makespan": self.makespan,
            "total_cpu": self.total_cpu,
            "overhead": self.overhead,
            "slr": self.slr,
            "n_tasks": len(self.per_task),
            "box": {k: vars(b) | {"outliers": list(b.outliers)} for k, b in self.box.items()},
        }


def overhead(makespan: float, cpu: float) -> tuple[float, float]:
    """Scheduling overhead and the (possibly corrected) makespan.

    A zero makespan with nonzero CPU time means the logs were too coarse:
    assume zero scheduler overhead and report the CPU time as the makespan.
    Negative overhead is clamped to zero with a warning.
    """
    if makespan < 0 or cpu < 0:
        raise ValueError("makespan and cpu must be >= 0")
    if makespan == 0:
        return 0.0, cpu
    value = makespan - cpu
    if value < 0:
        log.warning("negative overhead clamped to zero (makespan=%g, cpu=%g)", makespan, cpu)
        return 0.0, makespan
    return value, makespan


def slr(makespan: float, records) -> float:
    """Schedule length ratio: makespan over summed per-task compute time."""
    total = sum(r.cpu_time for r in records)
    if total <= 0:
        raise ZeroComputeTime("sum of task compute times must be positive")
    return makespan / total


def box_stats(values) -> BoxStats:
    """Five-number summary with Tukey 1.5*IQR whiskers; linear-interpolated quartiles."""
    xs = sorted(float(v) for v in values)
    if not xs:
        raise EmptyRecords("no values")

    def quantile(q):
        pos = q * (len(xs) - 1)
        lo = math.floor(pos)
        hi = math.ceil(pos)
        return xs[lo] + (pos - lo) * (xs[hi] - xs[lo])

    q1, med, q3 = quantile(0.25), quantile(0.5), quantile(0.75)
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = [x for x in xs if lo_fence <= x <= hi_fence]
    outliers = tuple(x for x in xs if x < lo_fence or x > hi_fence)
    return BoxStats(min=xs[0], q1=q1, median=med, q3=q3, max=xs[-1],
                    whisker_lo=min(inside), whisker_hi=max(inside), outliers=outliers)


def summarize(records, wall_span=None) -> MetricsSummary:
    """Aggregate task records into the headline metrics plus per-metric box stats."""
    records = sorted(records, key=lambda r: r.task_id)
    if not records:
        raise EmptyRecords("no task records")
    makespan = wall_span if wall_span is not None else (
        max(r.end_t for r in records) - min(r.submit_t for r in records)
    )
    total_cpu = sum(r.cpu_time for r in records)
    ovh, makespan = overhead(makespan, total_cpu)
    ratio = slr(makespan, records)
    box = {
        "cpu_time": box_stats([r.cpu_time for r in records]),
        "task_span": box_stats([r.end_t - r.submit_t for r in records]),
        "task_wait": box_stats([r.start_t - r.submit_t for r in records]),
    }
    return MetricsSummary(makespan=makespan, total_cpu=total_cpu, overhead=ovh,
                          slr=ratio, per_task=tuple(records), box=box)


def records_from_outcomes(outcomes) -> list[TaskRecord]:
    """Adapt simulator job outcomes to task records."""
    return [TaskRecord(task_id=o.job_id, submit_t=o.submit_t, start_t=o.start_t,
                       end_t=o.end_t, cpu_time=o.cpu_time) for o in outcomes]


def write_records_csv(path, records):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TaskRecord.CSV_HEADER)
        for r in records:
            writer.writerow([r.task_id, repr(r.submit_t), repr(r.start_t),
                             repr(r.end_t), repr(r.cpu_time)])


def read_records_csv(path) -> list[TaskRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        return [TaskRecord(task_id=int(row["task_id"]),
                           submit_t=float(row["submit_t"]),
                           start_t=float(row["start_t"]),
                           end_t=float(row["end_t"]),
                           cpu_time=float(row["cpu_time"]))
                for row in reader]


def write_summary_json(path, summary: MetricsSummary):
    with open(path, "w") as f:
        json.dump(summary.as_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def write_box_csv(path, summary: MetricsSummary):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "min", "q1", "median", "q3", "max",
                         "whisker_lo", "whisker_hi", "n_outliers"])
        for name, b in summary.box.items():
            writer.writerow([name, b.min, b.q1, b.median, b.q3, b.max,
                             b.whisker_lo, b.whisker_hi, len(b.outliers)])
