"""Local-process scheduler backend: real child processes behind the submit interface."""

from __future__ import annotations

import os
import subprocess
import threading

from ..errors import SpawnFailure, TimeLimitExceeded, UnknownHandle
from .spec import BULK, JobSpec


class ProcessJobHandle:
    def __init__(self, job_id, spec: JobSpec, process: subprocess.Popen):
        self.job_id = job_id
        self.spec = spec
        self.process = process
        self.timed_out = False
        self._timer = None

    @property
    def running(self):
        return self.process.poll() is None

    def wait(self, timeout=None):
        try:
            return self.process.wait(timeout=timeout)
        finally:
            if self.timed_out:
                raise TimeLimitExceeded(f"job {self.job_id} exceeded its time limit")

    def _on_time_limit(self):
        if self.running:
            self.timed_out = True
            self.process.kill()

    def terminate(self):
        if self._timer is not None:
            self._timer.cancel()
        if self.running:
            self.process.terminate()
            try:
                self.process.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.process.kill()


class ProcessBackend:
    """Spawns each submitted command as a child process.

    The child's environment has PORT removed so servers self-select a free
    port and register through their registration file.  time_limit is
    enforced by killing the process.  In bulk mode servers are meant to stay
    alive for the allocation lifetime; in per-job mode the owner retires the
    process after each task.
    """

    def __init__(self, mode=BULK):
        self.mode = mode
        self._handles = {}
        self._next_id = 0
        self._lock = threading.Lock()

    def submit(self, spec: JobSpec) -> ProcessJobHandle:
        if not spec.command:
            raise SpawnFailure("job spec has no command")
        env = dict(os.environ)
        env.pop("PORT", None)
        try:
            proc = subprocess.Popen(
                list(spec.command), env=env,
                stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL,
            )
        except OSError as exc:
            raise SpawnFailure(str(exc)) from exc
        with self._lock:
            job_id = self._next_id
            self._next_id += 1
            handle = ProcessJobHandle(job_id, spec, proc)
            self._handles[job_id] = handle
        if spec.time_limit and spec.time_limit > 0:
            handle._timer = threading.Timer(spec.time_limit, handle._on_time_limit)
            handle._timer.daemon = True
            handle._timer.start()
        return handle

    def cancel(self, handle):
        """Idempotent: cancelling a finished or unknown job is a no-op."""
        if isinstance(handle, int):
            with self._lock:
                handle = self._handles.get(handle)
            if handle is None:
                return
        handle.terminate()

    def lookup(self, job_id) -> ProcessJobHandle:
        with self._lock:
            try:
                return self._handles[job_id]
            except KeyError:
                raise UnknownHandle(f"no job {job_id}") from None

    def shutdown(self):
        with self._lock:
            handles = list(self._handles.values())
        for h in handles:
            h.terminate()
