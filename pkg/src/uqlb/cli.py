"""`bench` command-line orchestration: run benchmark suites, sweep the
simulator, and compare result trees.

Artifacts layout: results/<suite>/<mode>/<depth>/{records.csv, summary.json,
box.csv} with one extra seed-<k>/ level for multi-seed sim sweeps.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .backends.process import ProcessBackend
from .backends.sim import run_sim
from .backends.spec import BULK, PER_JOB, AllocationSpec, JobSpec, SimConfig
from .balancer import Balancer, BalancerConfig
from .clients.runner import ExperimentPlan, run_experiment
from .errors import KeyMismatch
from .metrics import (
    records_from_outcomes,
    summarize,
    write_box_csv,
    write_records_csv,
    write_summary_json,
)
from .models.synthetic import DurationModel

EXIT_OK = 0
EXIT_EXPERIMENT_FAILURE = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class BenchmarkSuite:
    """One named benchmark: model kind, resource request, desk-scale timings.

    All real-to-desk time conversions live here.  sim_seconds_per_minute maps a
    requested/expected minute to simulated seconds.
    """

    name: str
    model_kind: str                  # eigen | gp | synthetic
    model_args: tuple = ()
    n_evaluations: int = 100
    sim_seconds_per_minute: float = 0.010
    expected_minutes: tuple = (0.01, 0.01)   # (min, max) expected time to solution
    time_request_minutes: float = 1.0
    time_limit_minutes: float = 5.0
    alloc_minutes: float = 10.0
    cpus: int = 1
    memory_gb: float = 4.0
    duration_kind: str = "constant"          # constant | lognormal
    in_default_suite: bool = True

    def durations(self, seed, n=None):
        """Simulated task durations in seconds, deterministic in seed."""
        n = n or self.n_evaluations
        lo = self.expected_minutes[0] * self.sim_seconds_per_minute
        hi = self.expected_minutes[1] * self.sim_seconds_per_minute
        if self.duration_kind == "constant":
            return [hi] * n
        rng = np.random.default_rng(seed)
        raw = rng.lognormal(mean=np.log(15.0), sigma=1.0, size=n)   # minutes
        clipped = np.clip(raw, self.expected_minutes[0], self.expected_minutes[1])
        return list(clipped * self.sim_seconds_per_minute)

    def sim_config(self, depth, durations, seed) -> SimConfig:
        mean_task = float(np.mean(durations))
        # per-job environment re-init tracks the workload: costly for long
        # tasks, negligible next to queue wait for short ones
        reinit = DurationModel.constant(0.6 * mean_task) \
            if self.duration_kind == "lognormal" else DurationModel.uniform(0.5, 2.0)
        return SimConfig(
            queue_wait=DurationModel.uniform(1.0, 10.0),
            perjob_launch_overhead=DurationModel.constant(2.0),
            bulk_task_overhead=DurationModel.constant(0.001),
            env_reinit_overhead=reinit,
            server_init=1.0,
            node_count=depth,
            rng_seed=seed,
            allocation=AllocationSpec(
                allocation_time_limit=self.alloc_minutes * 60.0,
                backlog=1, workers_per_alloc=depth, max_worker_count=depth,
            ),
        )

    def job_spec(self, mode) -> JobSpec:
        command = (sys.executable, "-m", "uqlb.models.server",
                   "--model", self.model_kind, *self.model_args,
                   "--reg-file", "{reg_file}")
        return JobSpec(cpus=self.cpus, memory_gb=self.memory_gb,
                       time_request=self.time_request_minutes * 60.0,
                       time_limit=self.time_limit_minutes * 60.0,
                       command=command, mode=mode)


SUITES = {
    "eigen-100": BenchmarkSuite(
        name="eigen-100", model_kind="eigen", model_args=("--n", "100"),
        expected_minutes=(0.01, 0.01), time_request_minutes=1, time_limit_minutes=5,
        alloc_minutes=10,
    ),
    "eigen-5000": BenchmarkSuite(
        name="eigen-5000", model_kind="eigen", model_args=("--n", "5000"),
        expected_minutes=(2.0, 2.0), time_request_minutes=5, time_limit_minutes=10,
        alloc_minutes=60, in_default_suite=False,   # long-running, off by default
    ),
    "synthetic-gs2": BenchmarkSuite(
        name="synthetic-gs2", model_kind="synthetic",
        sim_seconds_per_minute=0.060, expected_minutes=(1.0, 180.0),
        time_request_minutes=15, time_limit_minutes=240, alloc_minutes=36000,
        cpus=8, memory_gb=32.0, duration_kind="lognormal",
    ),
    "gp": BenchmarkSuite(
        name="gp", model_kind="gp",
        expected_minutes=(0.1, 0.1), time_request_minutes=1, time_limit_minutes=5,
        alloc_minutes=10,
    ),
}


def _write_artifacts(outdir, records, wall_span=None):
    os.makedirs(outdir, exist_ok=True)
    summary = summarize(records, wall_span)
    write_records_csv(os.path.join(outdir, "records.csv"), summary.per_task)
    write_summary_json(os.path.join(outdir, "summary.json"), summary)
    write_box_csv(os.path.join(outdir, "box.csv"), summary)
    return summary


def run_sim_experiment(suite: BenchmarkSuite, mode, depth, seed, outdir):
    durations = suite.durations(seed)
    cfg = suite.sim_config(depth, durations, seed)
    outcomes = run_sim(durations, cfg, mode)
    return _write_artifacts(outdir, records_from_outcomes(outcomes))


def run_live_experiment(suite: BenchmarkSuite, mode, depth, seed, outdir,
                        n_evaluations=None, log_file=None):
    backend = ProcessBackend(mode=mode)
    balancer = Balancer(
        backend, suite.job_spec(mode),
        BalancerConfig(max_servers=depth, health_period=2.0, force_sync=False),
        reg_dir=outdir if os.path.isdir(outdir) else ".", log_file=log_file,
    )
    os.makedirs(outdir, exist_ok=True)
    balancer.reg_dir = outdir
    balancer.start(port=0)
    try:
        plan = ExperimentPlan(model_url=balancer.url,
                              n_evaluations=n_evaluations or suite.n_evaluations,
                              queue_depth=depth, seed=seed)
        result = run_experiment(plan)
        summary = _write_artifacts(outdir, result.records, result.wall_span)
        with open(os.path.join(outdir, "events.jsonl"), "w") as f:
            for e in balancer.events:
                f.write(json.dumps(e, sort_keys=True) + "\n")
        if not result.complete:
            raise RuntimeError(f"experiment incomplete: {len(result.records)} records")
        return summary
    finally:
        balancer.stop()


def cmd_run(args):
    if args.suite not in SUITES:
        print(f"unknown suite: {args.suite} (choose from {sorted(SUITES)})",
              file=sys.stderr)
        return EXIT_USAGE
    suite = SUITES[args.suite]
    modes = [PER_JOB, BULK] if args.mode == "both" else [args.mode]
    depths = [args.depth] if args.depth else [2, 10]
    failures = []
    for mode in modes:
        for depth in depths:
            outdir = os.path.join(args.results, suite.name, mode, str(depth))
            try:
                if args.sim:
                    summary = run_sim_experiment(suite, mode, depth, args.seed, outdir)
                else:
                    summary = run_live_experiment(suite, mode, depth, args.seed, outdir,
                                                  n_evaluations=args.n)
                print(f"{suite.name} {mode} depth={depth}: makespan={summary.makespan:.4f} "
                      f"overhead={summary.overhead:.4f} slr={summary.slr:.3f}")
            except Exception as exc:   # noqa: BLE001 - suite continues past failures
                print(f"{suite.name} {mode} depth={depth}: FAILED ({exc})", file=sys.stderr)
                failures.append((mode, depth, str(exc)))
    return EXIT_EXPERIMENT_FAILURE if failures else EXIT_OK


def cmd_sim(args):
    if args.suite not in SUITES:
        print(f"unknown suite: {args.suite} (choose from {sorted(SUITES)})",
              file=sys.stderr)
        return EXIT_USAGE
    suite = SUITES[args.suite]
    modes = [PER_JOB, BULK] if args.mode == "both" else [args.mode]
    depths = [args.depth] if args.depth else [2, 10]
    for mode in modes:
        for depth in depths:
            makespans, overheads, slrs = [], [], []
            for seed in range(args.seeds):
                outdir = os.path.join(args.results, suite.name, mode, str(depth),
                                      f"seed-{seed}")
                summary = run_sim_experiment(suite, mode, depth, seed, outdir)
                makespans.append(summary.makespan)
                overheads.append(summary.overhead)
                slrs.append(summary.slr)
            print(f"{suite.name} {mode} depth={depth} seeds={args.seeds}: "
                  f"mean makespan={np.mean(makespans):.4f} "
                  f"mean overhead={np.mean(overheads):.4f} "
                  f"mean slr={np.mean(slrs):.3f}")
    return EXIT_OK


def load_result_set(root):
    """Map depth-key -> summary dict from a results/<suite>/<mode> directory."""
    out = {}
    for entry in sorted(os.listdir(root)):
        path = os.path.join(root, entry, "summary.json")
        if os.path.isfile(path):
            with open(path) as f:
                out[entry] = json.load(f)
    if not out:
        raise KeyMismatch(f"no summaries under {root}")
    return out


def compare(results_a, results_b):
    """Per shared key: makespan/overhead ratios and the SLR pair.

    Flags rows with overhead ratio >= 1000x and makespan reduction >= 38%.
    """
    a, b = load_result_set(results_a), load_result_set(results_b)
    if set(a) != set(b):
        missing = set(a) ^ set(b)
        raise KeyMismatch(f"result sets disagree on keys: {sorted(missing)}")
    rows = []
    for key in sorted(a):
        sa, sb = a[key], b[key]
        makespan_ratio = sa["makespan"] / sb["makespan"] if sb["makespan"] else float("inf")
        overhead_ratio = (sa["overhead"] / sb["overhead"]
                          if sb["overhead"] else float("inf"))
        reduction = 1.0 - sb["makespan"] / sa["makespan"] if sa["makespan"] else 0.0
        rows.append({
            "key": key,
            "makespan_ratio": makespan_ratio,
            "overhead_ratio": overhead_ratio,
            "slr_a": sa["slr"], "slr_b": sb["slr"],
            "overhead_1000x": overhead_ratio >= 1000.0,
            "makespan_reduced_38pct": reduction >= 0.38,
        })
    return rows


def cmd_compare(args):
    try:
        rows = compare(args.results_a, args.results_b)
    except KeyMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXPERIMENT_FAILURE
    header = f"{'key':>8} {'makespan_ratio':>15} {'overhead_ratio':>15} " \
             f"{'slr_a':>10} {'slr_b':>10} flags"
    print(header)
    for r in rows:
        flags = []
        if r["overhead_1000x"]:
            flags.append("overhead>=1000x")
        if r["makespan_reduced_38pct"]:
            flags.append("makespan-38%")
        print(f"{r['key']:>8} {r['makespan_ratio']:>15.4f} {r['overhead_ratio']:>15.4f} "
              f"{r['slr_a']:>10.3f} {r['slr_b']:>10.3f} {','.join(flags)}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(rows, f, indent=2, sort_keys=True)
            f.write("\n")
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(prog="bench")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one suite across modes and depths")
    run_p.add_argument("suite")
    run_p.add_argument("--mode", choices=[PER_JOB, BULK, "both"], default="both")
    run_p.add_argument("--depth", type=int, default=None)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--n", type=int, default=None, help="override evaluation count")
    run_p.add_argument("--sim", action="store_true",
                       help="use the scheduler emulator instead of live processes")
    run_p.add_argument("--results", default="results")
    run_p.set_defaults(func=cmd_run)

    sim_p = sub.add_parser("sim", help="simulator-only multi-seed sweep")
    sim_p.add_argument("suite")
    sim_p.add_argument("--mode", choices=[PER_JOB, BULK, "both"], default="both")
    sim_p.add_argument("--depth", type=int, default=None)
    sim_p.add_argument("--seeds", type=int, default=20)
    sim_p.add_argument("--results", default="results")
    sim_p.set_defaults(func=cmd_sim)

    cmp_p = sub.add_parser("compare", help="compare two result trees")
    cmp_p.add_argument("results_a")
    cmp_p.add_argument("results_b")
    cmp_p.add_argument("--out", default=None)
    cmp_p.set_defaults(func=cmd_compare)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
