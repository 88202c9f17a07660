"""Resource-request and simulator configuration records."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..models.synthetic import DurationModel

PER_JOB = "perjob"
BULK = "bulk"
MODES = (PER_JOB, BULK)


@dataclass(frozen=True)
class JobSpec:
    """One scheduler resource request.

    time_request is the scheduling hint (expected runtime); time_limit the
    hard kill bound.  Per-job mode reserves time_limit in full, bulk mode
    schedules on time_request and uses time_limit only for termination.
    """

    cpus: int = 1
    memory_gb: float = 4.0
    time_request: float = 60.0
    time_limit: float = 300.0
    command: tuple[str, ...] = ()
    mode: str = PER_JOB

    def __post_init__(self):
        object.__setattr__(self, "command", tuple(self.command))
        if self.cpus < 1:
            raise ValueError("cpus must be >= 1")
        if self.time_request > self.time_limit:
            raise ValueError("time_request must not exceed time_limit")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class AllocationSpec:
    """Bulk-allocation parameters (persistent-worker style)."""

    allocation_time_limit: float = 600.0
    backlog: int = 1
    workers_per_alloc: int = 1
    max_worker_count: int = 1

    def __post_init__(self):
        if self.backlog < 1 or self.workers_per_alloc < 1 or self.max_worker_count < 1:
            raise ValueError("backlog and worker counts must be >= 1")
        if self.workers_per_alloc > self.max_worker_count:
            raise ValueError("workers_per_alloc must not exceed max_worker_count")


def _const0():
    return DurationModel.constant(0.0)


@dataclass(frozen=True)
class SimConfig:
    queue_wait: DurationModel = field(default_factory=_const0)
    perjob_launch_overhead: DurationModel = field(default_factory=_const0)
    bulk_task_overhead: DurationModel = field(default_factory=_const0)
    env_reinit_overhead: DurationModel = field(default_factory=_const0)
    server_init: float = 1.0
    node_count: int = 1
    rng_seed: int = 0
    allocation: AllocationSpec = field(default_factory=AllocationSpec)

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if self.server_init < 0:
            raise ValueError("server_init must be >= 0")


@dataclass(frozen=True)
class SimJobOutcome:
    job_id: int
    submit_t: float
    alloc_t: float
    start_t: float
    end_t: float
    cpu_time: float
    node_id: int

    def __post_init__(self):
        if not (self.submit_t <= self.alloc_t <= self.start_t <= self.end_t):
            raise ValueError("timestamps must satisfy submit <= alloc <= start <= end")

    CSV_HEADER = ("job_id", "submit_t", "alloc_t", "start_t", "end_t", "cpu_time", "node_id")

    def as_row(self):
        return (self.job_id, self.submit_t, self.alloc_t, self.start_t,
                self.end_t, self.cpu_time, self.node_id)


def _duration_from(obj):
    if isinstance(obj, DurationModel):
        return obj
    if isinstance(obj, (int, float)):
        return DurationModel.constant(obj)
    return DurationModel.from_dict(obj)


def load_sim_config(source) -> SimConfig:
    """SimConfig from a dict or a JSON file path; keys match field names."""
    obj = source
    if isinstance(source, str):
        with open(source) as f:
            obj = json.load(f)
    kwargs = dict(obj)
    for key in ("queue_wait", "perjob_launch_overhead", "bulk_task_overhead", "env_reinit_overhead"):
        if key in kwargs:
            kwargs[key] = _duration_from(kwargs[key])
    if "allocation" in kwargs and not isinstance(kwargs["allocation"], AllocationSpec):
        kwargs["allocation"] = AllocationSpec(**kwargs["allocation"])
    return SimConfig(**kwargs)


def load_job_spec(source) -> JobSpec:
    obj = source
    if isinstance(source, str):
        with open(source) as f:
            obj = json.load(f)
    return JobSpec(**obj)
