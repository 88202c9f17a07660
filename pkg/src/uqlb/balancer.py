"""Load-balancing proxy: endpoint registry, file registration, preflight,
periodic health checks and first-come-first-served dispatch with adaptive
server spawning through a scheduler backend.

The balancer exposes the same HTTP surface as a model server, so clients are
oblivious to whether they talk to one server or a managed pool.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from .backends.process import ProcessBackend
from .backends.spec import JobSpec, load_job_spec
from .errors import (
    NoCapacity,
    PreflightMismatch,
    RegistrationTimeout,
    UnreachableServer,
    UpstreamFailure,
)
from .metrics import TaskRecord
from . import protocol
from .protocol import (
    EvaluationRequest,
    EvaluationResponse,
    ModelDescriptor,
    health_check,
)

# endpoint lifecycle states
SPAWNING = "Spawning"
REGISTERING = "Registering"
READY = "Ready"
BUSY = "Busy"
UNHEALTHY = "Unhealthy"
RETIRED = "Retired"

LIVE_STATES = (SPAWNING, REGISTERING, READY, BUSY)


@dataclass
class ServerEndpoint:
    id: int
    address: str | None = None
    state: str = SPAWNING
    backend_job = None
    reg_file: str | None = None
    descriptor: ModelDescriptor | None = None
    last_health_ok: float = 0.0

    @property
    def url(self):
        return f"http://{self.address}"


@dataclass(frozen=True)
class BalancerConfig:
    max_servers: int = 1
    health_period: float = 5.0
    registration_timeout: float = 60.0
    registration_poll: float = 0.25
    queue_bound: int | None = None       # None: unbounded intake
    retries: int = 1                     # retries after the first attempt
    evaluate_timeout: float = 300.0
    expected_model: str | None = None
    force_sync: bool = True              # filesystem refresh before each poll

    def __post_init__(self):
        if self.max_servers < 1:
            raise ValueError("max_servers must be >= 1")


def read_registration(path) -> str:
    """Parse a "host:port" registration file; raises on malformed content."""
    with open(path) as f:
        line = f.read().strip()
    host, _, port = line.partition(":")
    if not host or not port.isdigit():
        raise ValueError(f"malformed registration line: {line!r}")
    return f"{host}:{int(port)}"


def register_from_file(path, timeout, poll=0.25, force_sync=True,
                       health_timeout=protocol.DEFAULT_HEALTH_TIMEOUT):
    """Poll for a registration file and health-check the address it names.

    Forces a filesystem refresh before each poll (sync workaround for
    slow-to-propagate shared filesystems).
    """
    deadline = time.monotonic() + timeout
    address = None
    while time.monotonic() < deadline:
        if force_sync:
            os.sync()
        if os.path.exists(path):
            try:
                address = read_registration(path)
                break
            except ValueError:
                pass   # partially visible content: keep polling
        time.sleep(poll)
    if address is None:
        raise RegistrationTimeout(f"registration file {path} never appeared")
    status = health_check(address, timeout=health_timeout)
    if not status:
        raise UnreachableServer(f"{address} registered but failed health check: {status.reason}")
    return address


class _PendingRequest:
    def __init__(self, req: EvaluationRequest, seq: int):
        self.req = req
        self.seq = seq
        self.arrival_t = time.monotonic()
        self.dispatch_t = None
        self.attempts = 0
        self.done = threading.Event()
        self.response: EvaluationResponse | None = None
        self.failure: Exception | None = None


class Balancer:
    def __init__(self, backend, job_spec: JobSpec, config: BalancerConfig = BalancerConfig(),
                 reg_dir=".", log_file=None):
        self.backend = backend
        self.job_spec = job_spec
        self.config = config
        self.reg_dir = reg_dir
        self._log_file = log_file
        self._log_lock = threading.Lock()
        self.events: list[dict] = []

        self._cv = threading.Condition()
        self._queue: deque[_PendingRequest] = deque()
        self._endpoints: dict[int, ServerEndpoint] = {}
        self._next_endpoint_id = 0
        self._next_seq = 0
        self._stopping = False
        self.records: list[TaskRecord] = []
        self._frontend = None
        self._threads: list[threading.Thread] = []

    # --- observability ---

    def log_event(self, event, **fields):
        entry = {"event": event, "t": time.monotonic(), **fields}
        with self._log_lock:
            self.events.append(entry)
            if self._log_file:
                self._log_file.write(json.dumps(entry, sort_keys=True) + "\n")
                self._log_file.flush()

    # --- registry views (callers hold no lock) ---

    def live_endpoints(self):
        with self._cv:
            return [e for e in self._endpoints.values() if e.state in LIVE_STATES]

    def descriptors(self):
        with self._cv:
            return [e.descriptor for e in self._endpoints.values()
                    if e.descriptor is not None and e.state in LIVE_STATES]

    # --- lifecycle ---

    def start(self, port=0):
        self._frontend = _Frontend(self, port).start()
        t = threading.Thread(target=self._dispatch_loop, daemon=True, name="dispatcher")
        t.start()
        self._threads.append(t)
        h = threading.Thread(target=self._health_loop, daemon=True, name="health")
        h.start()
        self._threads.append(h)
        return self

    @property
    def port(self):
        return self._frontend.port

    @property
    def url(self):
        return f"http://127.0.0.1:{self.port}"

    def stop(self):
        with self._cv:
            self._stopping = True
            self._cv.notify_all()
        if self._frontend is not None:
            self._frontend.stop()
        for t in self._threads:
            t.join(timeout=5)
        self.backend.shutdown()

    # --- intake ---

    def dispatch(self, req: EvaluationRequest) -> EvaluationResponse:
        """Enqueue a request FIFO and block until its response is available."""
        with self._cv:
            if self._stopping:
                raise UpstreamFailure("balancer is shutting down")
            if self.config.queue_bound is not None and len(self._queue) >= self.config.queue_bound:
                raise NoCapacity(f"queue bound {self.config.queue_bound} reached")
            item = _PendingRequest(req, self._next_seq)
            self._next_seq += 1
            self._queue.append(item)
            self._cv.notify_all()
        item.done.wait()
        if item.failure is not None:
            raise item.failure
        return item.response

    def ensure_descriptors(self, timeout=None):
        """Warm the pool until at least one descriptor is known.

        Informational queries can arrive before any evaluation has forced a
        spawn; spawn one server (within max_servers) and wait for it.
        """
        if timeout is None:
            timeout = self.config.registration_timeout
        deadline = time.monotonic() + timeout
        with self._cv:
            while not self._stopping:
                if any(e.descriptor is not None and e.state in LIVE_STATES
                       for e in self._endpoints.values()):
                    return True
                pending = any(e.state in (SPAWNING, REGISTERING)
                              for e in self._endpoints.values())
                if not pending and self._live_count() < self.config.max_servers:
                    self._spawn_locked()
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._cv.wait(timeout=min(remaining, 0.25))
        return False

    # --- dispatcher ---

    def _idle_ready(self):
        ready = [e for e in self._endpoints.values() if e.state == READY]
        return min(ready, key=lambda e: e.id) if ready else None

    def _live_count(self):
        return sum(1 for e in self._endpoints.values() if e.state in LIVE_STATES)

    def _should_spawn(self):
        pending_servers = sum(1 for e in self._endpoints.values()
                              if e.state in (SPAWNING, REGISTERING))
        return (self._queue and pending_servers < len(self._queue)
                and self._live_count() < self.config.max_servers)

    def _dispatch_loop(self):
        while True:
            with self._cv:
                while not self._stopping:
                    if self._queue:
                        endpoint = self._idle_ready()
                        if endpoint is not None:
                            break
                        if self._should_spawn():
                            self._spawn_locked()
                    self._cv.wait(timeout=0.5)
                if self._stopping:
                    break
                item = self._queue.popleft()
                endpoint.state = BUSY
            item.attempts += 1
            if item.dispatch_t is None:
                item.dispatch_t = time.monotonic()
            self.log_event("dispatch", seq=item.seq, endpoint=endpoint.id,
                           attempt=item.attempts)
            worker = threading.Thread(
                target=self._evaluate_on, args=(item, endpoint), daemon=True
            )
            worker.start()
        # drain: fail anything still queued
        with self._cv:
            pending = list(self._queue)
            self._queue.clear()
        for item in pending:
            item.failure = UpstreamFailure("balancer stopped before dispatch")
            item.done.set()

    def _evaluate_on(self, item: _PendingRequest, endpoint: ServerEndpoint):
        try:
            outputs = protocol.client_evaluate(
                endpoint.url, item.req.model_name, [list(v) for v in item.req.inputs],
                dict(item.req.config), timeout=self.config.evaluate_timeout,
            )
        except Exception as exc:   # noqa: BLE001 - any upstream failure is retryable
            self._on_upstream_failure(item, endpoint, exc)
            return
        with self._cv:
            if endpoint.state == BUSY:
                endpoint.state = READY
            self._cv.notify_all()
        end_t = time.monotonic()
        self.records.append(TaskRecord(
            task_id=item.seq, submit_t=item.arrival_t, start_t=item.dispatch_t,
            end_t=end_t, cpu_time=end_t - item.dispatch_t,
        ))
        self.log_event("complete", seq=item.seq, endpoint=endpoint.id, ok=True)
        item.response = EvaluationResponse(outputs=outputs)
        item.done.set()

    def _on_upstream_failure(self, item, endpoint, exc):
        self.log_event("complete", seq=item.seq, endpoint=endpoint.id, ok=False,
                       error=type(exc).__name__)
        self._retire(endpoint, reason=f"evaluation failed: {exc}")
        if item.attempts <= self.config.retries:
            with self._cv:
                self._queue.appendleft(item)   # keeps FIFO position for the retry
                self._cv.notify_all()
            return
        item.failure = UpstreamFailure(f"evaluation failed after {item.attempts} attempts: {exc}")
        item.done.set()

    # --- spawning and registration ---

    def _spawn_locked(self):
        endpoint = ServerEndpoint(id=self._next_endpoint_id)
        self._next_endpoint_id += 1
        endpoint.reg_file = os.path.join(self.reg_dir, f"ep-{endpoint.id}.txt")
        if os.path.exists(endpoint.reg_file):
            os.unlink(endpoint.reg_file)
        command = tuple(
            arg.replace("{reg_file}", endpoint.reg_file) for arg in self.job_spec.command
        )
        spec = JobSpec(cpus=self.job_spec.cpus, memory_gb=self.job_spec.memory_gb,
                       time_request=self.job_spec.time_request,
                       time_limit=self.job_spec.time_limit,
                       command=command, mode=self.job_spec.mode)
        endpoint.backend_job = self.backend.submit(spec)
        self._endpoints[endpoint.id] = endpoint
        self.log_event("spawn", endpoint=endpoint.id, job=endpoint.backend_job.job_id)
        t = threading.Thread(target=self._register, args=(endpoint,), daemon=True)
        t.start()

    def _register(self, endpoint: ServerEndpoint):
        cfg = self.config
        try:
            address = register_from_file(
                endpoint.reg_file, timeout=cfg.registration_timeout,
                poll=cfg.registration_poll, force_sync=cfg.force_sync,
            )
        except (RegistrationTimeout, UnreachableServer) as exc:
            self.log_event("register", endpoint=endpoint.id, ok=False,
                           error=type(exc).__name__)
            self._retire(endpoint, reason=str(exc))
            return
        with self._cv:
            endpoint.address = address
            endpoint.state = REGISTERING
        self.log_event("register", endpoint=endpoint.id, address=address, ok=True)
        try:
            descriptor = self.preflight(endpoint)
        except Exception as exc:   # noqa: BLE001
            self.log_event("preflight", endpoint=endpoint.id, ok=False,
                           error=type(exc).__name__)
            self._retire(endpoint, reason=str(exc))
            return
        with self._cv:
            endpoint.descriptor = descriptor
            endpoint.state = READY
            endpoint.last_health_ok = time.monotonic()
            self._cv.notify_all()

    def preflight(self, endpoint: ServerEndpoint) -> ModelDescriptor:
        """At least five informational queries before the endpoint serves anything."""
        url = endpoint.url
        queries = 0
        info = protocol.get_info(url)
        queries += 1
        names = info.get("models", [])
        if not names:
            raise PreflightMismatch("server advertises no models")
        name = self.config.expected_model or names[0]
        if name not in names:
            raise PreflightMismatch(f"expected model {name!r}, server has {names}")
        input_sizes = protocol.get_input_sizes(url, name)
        queries += 1
        output_sizes = protocol.get_output_sizes(url, name)
        queries += 1
        features = protocol.get_features(url, name)
        queries += 1
        status = health_check(endpoint.address)
        queries += 1
        if not status:
            raise PreflightMismatch(f"health check failed during preflight: {status.reason}")
        self.log_event("preflight", endpoint=endpoint.id, ok=True, queries=queries,
                       model=name)
        return ModelDescriptor(name=name, input_sizes=input_sizes,
                               output_sizes=output_sizes, features=features)

    def _retire(self, endpoint: ServerEndpoint, reason=""):
        with self._cv:
            if endpoint.state == RETIRED:
                return
            endpoint.state = RETIRED
            self._cv.notify_all()
        if endpoint.backend_job is not None:
            self.backend.cancel(endpoint.backend_job)
        if endpoint.reg_file and os.path.exists(endpoint.reg_file):
            try:
                os.unlink(endpoint.reg_file)
            except OSError:
                pass
        self.log_event("retire", endpoint=endpoint.id, reason=reason)

    # --- health ---

    def _health_loop(self):
        while True:
            with self._cv:
                if self._stopping:
                    return
                targets = [e for e in self._endpoints.values() if e.state == READY]
            for endpoint in targets:
                status = health_check(endpoint.address)
                self.log_event("health", endpoint=endpoint.id, ok=bool(status),
                               reason=status.reason)
                if status:
                    endpoint.last_health_ok = time.monotonic()
                else:
                    with self._cv:
                        # may have gone Busy since the snapshot: never fail mid-evaluation
                        if endpoint.state != READY:
                            continue
                        endpoint.state = UNHEALTHY
                    self._retire(endpoint, reason=f"health check failed: {status.reason}")
            with self._cv:
                if self._idle_ready() is None and self._should_spawn():
                    self._spawn_locked()
                self._cv.wait(timeout=self.config.health_period)
                if self._stopping:
                    return


# --- HTTP frontend (transparent proxy) --------------------------------------

class _FrontendHandler(protocol._Handler):
    def do_GET(self):
        if self.path == "/info":
            self.server.balancer.ensure_descriptors()
            names = sorted({d.name for d in self.server.balancer.descriptors()})
            self._reply(200, {"protocolVersion": protocol.PROTOCOL_VERSION,
                              "models": names})
        else:
            self._reply_error(404, "NotFound", f"no such endpoint: {self.path}")

    def _descriptor_for(self, obj):
        if not isinstance(obj, dict) or "name" not in obj:
            raise protocol.SchemaViolation("missing field: name")
        self.server.balancer.ensure_descriptors()
        for d in self.server.balancer.descriptors():
            if d.name == obj["name"]:
                return d
        raise protocol.SchemaViolation(f"unknown model: {obj['name']}")

    def do_POST(self):
        try:
            body = self._read_body()
            if self.path == "/evaluate":
                req = protocol.decode_request(body)
                try:
                    resp = self.server.balancer.dispatch(req)
                except NoCapacity as exc:
                    self._reply_error(503, "NoCapacity", str(exc))
                    return
                except UpstreamFailure as exc:
                    self._reply_error(502, "UpstreamFailure", str(exc))
                    return
                self._reply(200, {"output": [list(v) for v in resp.outputs]})
            elif self.path in ("/input-sizes", "/output-sizes", "/model-features"):
                d = self._descriptor_for(protocol._loads(body))
                if self.path == "/input-sizes":
                    self._reply(200, {"inputSizes": list(d.input_sizes)})
                elif self.path == "/output-sizes":
                    self._reply(200, {"outputSizes": list(d.output_sizes)})
                else:
                    self._reply(200, {"features": d.features})
            elif self.path in ("/gradient", "/jacobian", "/hessian"):
                self._reply_error(400, "NotSupported", f"{self.path[1:]} is not supported")
            else:
                self._reply_error(404, "NotFound", f"no such endpoint: {self.path}")
        except protocol.MalformedBody as exc:
            self._reply_error(400, "MalformedBody", str(exc))
        except protocol.SchemaViolation as exc:
            self._reply_error(400, "SchemaViolation", str(exc))
        except Exception as exc:   # noqa: BLE001
            self._reply_error(500, "InternalError", str(exc))


class _Frontend(protocol.ModelServer):
    def __init__(self, balancer: Balancer, port):
        self.balancer = balancer
        protocol.ModelServer.__init__(self, [], port)
        self.RequestHandlerClass = _FrontendHandler


def main(argv=None):
    parser = argparse.ArgumentParser(description="Model-evaluation load balancer")
    parser.add_argument("--port", type=int, default=4242)
    parser.add_argument("--max-servers", type=int, default=1)
    parser.add_argument("--backend", choices=["process"], default="process")
    parser.add_argument("--mode", choices=["perjob", "bulk"], default="bulk")
    parser.add_argument("--job-spec", required=True, help="JSON job spec file")
    parser.add_argument("--reg-dir", default=".")
    parser.add_argument("--log-file", default=None)
    args = parser.parse_args(argv)

    job_spec = load_job_spec(args.job_spec)
    backend = ProcessBackend(mode=args.mode)
    config = BalancerConfig(max_servers=args.max_servers)
    log_file = open(args.log_file, "a") if args.log_file else None
    balancer = Balancer(backend, job_spec, config, reg_dir=args.reg_dir,
                        log_file=log_file).start(port=args.port)
    print(f"balancer listening on port {balancer.port}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        balancer.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
