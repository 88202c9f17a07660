"""Deterministic discrete-event scheduler emulator.

Two allocation semantics:

* per-job: every task pays queue wait, launch overhead, environment re-init
  and server start-up before its command runs; one scheduler allocation per task.
* bulk: one up-front allocation pays the queue wait once; persistent workers
  boot a server once and then stream tasks at a small per-task overhead.

The clock is integer nanoseconds (no float drift in event ordering); ties are
broken by (timestamp, job_id).  No wall-clock sleeping anywhere.
"""

from __future__ import annotations

import numpy as np

from ..errors import AllocationExpired
from .spec import BULK, PER_JOB, SimConfig, SimJobOutcome

NS = 1_000_000_000


def _ns(seconds: float) -> int:
    return int(round(seconds * NS))


def _sec(ns: int) -> float:
    return ns / NS


def run_sim(workload, cfg: SimConfig, mode: str, cancel_at=None) -> list[SimJobOutcome]:
    """Simulate the workload (list of task durations in seconds) under one mode.

    ``cancel_at`` maps job_id to a cancellation time in seconds: jobs cancelled
    before they start never appear in the output; jobs cancelled mid-run get a
    truncated end time and cpu time.  Deterministic given cfg.rng_seed.
    """
    durations = [_ns(d) for d in workload]
    if any(d < 0 for d in durations):
        raise ValueError("task durations must be >= 0")
    cancels = {int(j): _ns(t) for j, t in (cancel_at or {}).items()}
    rng = np.random.default_rng(cfg.rng_seed)
    if mode == PER_JOB:
        return _run_perjob(durations, cfg, rng, cancels)
    if mode == BULK:
        return _run_bulk(durations, cfg, rng, cancels)
    raise ValueError(f"unknown mode: {mode}")


def _run_perjob(durations, cfg, rng, cancels):
    node_free = [0] * cfg.node_count
    server_init = _ns(cfg.server_init)
    outcomes = []
    for job_id, dur in enumerate(durations):
        # earliest-available node, lowest id on ties
        node = min(range(cfg.node_count), key=lambda i: (node_free[i], i))
        submit = node_free[node]
        queue_wait = _ns(cfg.queue_wait.draw(rng))
        launch = _ns(cfg.perjob_launch_overhead.draw(rng))
        reinit = _ns(cfg.env_reinit_overhead.draw(rng))
        alloc = submit + queue_wait
        start = alloc + launch + reinit + server_init
        end = start + dur
        if job_id in cancels:
            t = cancels[job_id]
            if t <= start:
                continue   # cancelled while queued: never starts
            end = min(end, t)
        node_free[node] = end
        outcomes.append(SimJobOutcome(
            job_id=job_id, submit_t=_sec(submit), alloc_t=_sec(alloc),
            start_t=_sec(start), end_t=_sec(end), cpu_time=_sec(end - start),
            node_id=node,
        ))
    return outcomes


class _Worker:
    __slots__ = ("wid", "free", "alloc_ready", "expiry")

    def __init__(self, wid, alloc_ready, expiry, server_init):
        self.wid = wid
        self.alloc_ready = alloc_ready
        self.expiry = expiry
        self.free = alloc_ready + server_init   # boots its model server once


def _run_bulk(durations, cfg, rng, cancels):
    alloc = cfg.allocation
    server_init = _ns(cfg.server_init)
    alloc_limit = _ns(alloc.allocation_time_limit)
    allocations_requested = 0
    max_allocations = 1 + alloc.backlog   # initial request plus backlog renewals

    workers: list[_Worker] = []

    def request_allocation(request_t):
        nonlocal allocations_requested
        if allocations_requested >= max_allocations:
            raise AllocationExpired(
                "tasks remain but the allocation backlog is exhausted"
            )
        allocations_requested += 1
        ready = request_t + _ns(cfg.queue_wait.draw(rng))
        expiry = ready + alloc_limit
        count = min(alloc.workers_per_alloc, alloc.max_worker_count)
        base = len(workers)
        for k in range(count):
            workers.append(_Worker(base + k, ready, expiry, server_init))

    request_allocation(0)
    outcomes = []
    for job_id, dur in enumerate(durations):
        if dur + server_init > alloc_limit:
            raise AllocationExpired(
                "task cannot fit inside the allocation time limit"
            )
        while True:
            # a worker may take the task only if it finishes inside its window
            eligible = [w for w in workers if w.free + dur <= w.expiry]
            if eligible:
                break
            # allocations expired out from under the queue: renew at expiry
            request_allocation(max(w.expiry for w in workers))
        worker = min(eligible, key=lambda w: (w.free, w.wid))
        handoff = worker.free
        overhead = _ns(cfg.bulk_task_overhead.draw(rng))
        start = handoff + overhead
        end = start + dur
        submit = 0
        if job_id in cancels:
            t = cancels[job_id]
            if t <= start:
                continue
            end = min(end, t)
        worker.free = end
        outcomes.append(SimJobOutcome(
            job_id=job_id, submit_t=_sec(submit), alloc_t=_sec(worker.alloc_ready),
            start_t=_sec(start), end_t=_sec(end), cpu_time=_sec(end - start),
            node_id=worker.wid,
        ))
    return sorted(outcomes, key=lambda o: (o.submit_t, o.job_id))


def write_outcomes_csv(path, outcomes):
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SimJobOutcome.CSV_HEADER)
        for o in outcomes:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in o.as_row()])
