"""Parallel experiment driver keeping a fixed number of evaluations in flight."""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .. import protocol
from ..errors import UpstreamFailure
from ..metrics import TaskRecord
from .lhs import ParameterBox, lhs_sample


@dataclass(frozen=True)
class ExperimentPlan:
    model_url: str
    n_evaluations: int = 100
    queue_depth: int = 2
    seed: int = 0
    model_name: str | None = None              # default: first model the server reports
    box: ParameterBox | None = None            # LHS source ...
    fixed_inputs: tuple | None = None          # ... or an explicit input list
    max_consecutive_failures: int = 5
    evaluate_timeout: float = 300.0

    def __post_init__(self):
        if self.queue_depth < 1:
            raise ValueError("queue_depth must be >= 1")
        if self.n_evaluations < 1:
            raise ValueError("n_evaluations must be >= 1")


@dataclass
class ExperimentResult:
    records: list          # TaskRecord, sorted by task_id
    wall_span: float
    complete: bool
    n_failures: int
    inflight_max: int      # highest simultaneous in-flight count observed

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.task_id)


def _plan_inputs(plan: ExperimentPlan, input_sizes):
    if plan.fixed_inputs is not None:
        return [list(v) for v in plan.fixed_inputs]
    if plan.box is not None:
        return lhs_sample(plan.box, plan.n_evaluations, plan.seed)
    # models with a single scalar input: feed the evaluation index
    if input_sizes == [1]:
        return [[float(i)] for i in range(plan.n_evaluations)]
    raise ValueError("plan needs a parameter box or a fixed input list")


def run_experiment(plan: ExperimentPlan) -> ExperimentResult:
    """Run the plan against a model or balancer URL.

    Exactly queue_depth evaluations are kept in flight (natural ramp-down at
    the tail); aborts after max_consecutive_failures consecutive upstream
    failures, returning partial records flagged incomplete.
    """
    info = protocol.get_info(plan.model_url)
    name = plan.model_name or sorted(info["models"])[0]
    input_sizes = protocol.get_input_sizes(plan.model_url, name)
    inputs = _plan_inputs(plan, input_sizes)
    if len(inputs) < plan.n_evaluations:
        raise ValueError("not enough inputs for the requested evaluation count")

    lock = threading.Lock()
    state = {"consecutive_failures": 0, "failures": 0, "inflight": 0, "inflight_max": 0}
    abort = threading.Event()
    records: list[TaskRecord] = []
    t0 = time.monotonic()

    def one(task_id):
        if abort.is_set():
            return
        submit_t = time.monotonic() - t0
        with lock:
            state["inflight"] += 1
            state["inflight_max"] = max(state["inflight_max"], state["inflight"])
        start_t = time.monotonic() - t0
        try:
            # single input vector per request; wrap per the model's input count
            vec = inputs[task_id]
            protocol.client_evaluate(plan.model_url, name, [vec],
                                     timeout=plan.evaluate_timeout)
        except Exception:   # noqa: BLE001 - failure accounting below
            with lock:
                state["inflight"] -= 1
                state["failures"] += 1
                state["consecutive_failures"] += 1
                if state["consecutive_failures"] >= plan.max_consecutive_failures:
                    abort.set()
            return
        end_t = time.monotonic() - t0
        with lock:
            state["inflight"] -= 1
            state["consecutive_failures"] = 0
            records.append(TaskRecord(task_id=task_id, submit_t=submit_t,
                                      start_t=start_t, end_t=end_t,
                                      cpu_time=end_t - start_t))

    with ThreadPoolExecutor(max_workers=plan.queue_depth) as pool:
        futures = [pool.submit(one, i) for i in range(plan.n_evaluations)]
        for f in futures:
            f.result()

    wall_span = time.monotonic() - t0
    complete = len(records) == plan.n_evaluations and not abort.is_set()
    if not records and abort.is_set():
        raise UpstreamFailure("experiment aborted with zero successful evaluations")
    return ExperimentResult(records=records, wall_span=wall_span, complete=complete,
                            n_failures=state["failures"], inflight_max=state["inflight_max"])
