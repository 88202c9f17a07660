"""HTTP+JSON model-evaluation protocol: wire codecs, server skeleton and client.

The wire format is documented in docs/protocol.md.  Field names on the wire are
exactly: name, input, output, config, error.
"""

from __future__ import annotations

import json
import math
import os
import socket
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

from .errors import (
    ClientTimeout,
    MalformedBody,
    PortInUse,
    ProtocolError,
    RemoteError,
    SchemaViolation,
    Unreachable,
)

PROTOCOL_VERSION = "1.0"
DEFAULT_PORT = 4242
DEFAULT_HEALTH_TIMEOUT = 2.0

FEATURE_NAMES = ("evaluate", "gradient", "jacobian", "hessian")


@dataclass(frozen=True)
class ModelDescriptor:
    """Software form of a map from n real inputs to m real outputs."""

    name: str
    input_sizes: tuple[int, ...]
    output_sizes: tuple[int, ...]
    features: dict = field(default_factory=lambda: {"evaluate": True})

    def __post_init__(self):
        if not self.name:
            raise SchemaViolation("model name must be non-empty")
        object.__setattr__(self, "input_sizes", tuple(self.input_sizes))
        object.__setattr__(self, "output_sizes", tuple(self.output_sizes))
        for sizes, label in ((self.input_sizes, "input_sizes"), (self.output_sizes, "output_sizes")):
            if not sizes or any(int(s) < 1 for s in sizes):
                raise SchemaViolation(f"{label} must be non-empty with all entries >= 1")
        feats = {k: False for k in FEATURE_NAMES}
        feats.update(self.features)
        feats["evaluate"] = True
        object.__setattr__(self, "features", feats)


@dataclass(frozen=True)
class EvaluationRequest:
    model_name: str
    inputs: tuple
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(tuple(float(x) for x in vec) for vec in self.inputs))
        if not self.model_name:
            raise SchemaViolation("model_name must be non-empty")
        if not self.inputs or any(len(vec) == 0 for vec in self.inputs):
            raise SchemaViolation("inputs must be non-empty vectors")
        _check_finite(self.inputs)

    def validate_against(self, descriptor: ModelDescriptor):
        shape = tuple(len(v) for v in self.inputs)
        if shape != descriptor.input_sizes:
            raise SchemaViolation(
                f"input shape {shape} does not match declared input sizes {descriptor.input_sizes}"
            )


@dataclass(frozen=True)
class EvaluationResponse:
    outputs: tuple | None = None
    error_code: str | None = None
    error_message: str | None = None

    def __post_init__(self):
        if (self.outputs is None) == (self.error_code is None):
            raise SchemaViolation("response must carry either outputs or an error, not both")
        if self.outputs is not None:
            object.__setattr__(
                self, "outputs", tuple(tuple(float(x) for x in vec) for vec in self.outputs)
            )
            _check_finite(self.outputs)

    @property
    def ok(self):
        return self.outputs is not None


def _check_finite(vectors):
    for vec in vectors:
        for x in vec:
            if not math.isfinite(x):
                raise SchemaViolation("non-finite number in payload")


# --- codecs -----------------------------------------------------------------

def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def _loads(data: bytes):
    try:
        return json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedBody(str(exc)) from exc


def encode_request(req: EvaluationRequest) -> bytes:
    return _dumps({
        "name": req.model_name,
        "input": [list(v) for v in req.inputs],
        "config": req.config,
    })


def decode_request(data: bytes) -> EvaluationRequest:
    obj = _loads(data)
    if not isinstance(obj, dict):
        raise SchemaViolation("request body must be a JSON object")
    for key in ("name", "input"):
        if key not in obj:
            raise SchemaViolation(f"missing field: {key}")
    name, inputs = obj["name"], obj["input"]
    config = obj.get("config", {})
    if not isinstance(name, str):
        raise SchemaViolation("name must be a string")
    if not isinstance(config, dict):
        raise SchemaViolation("config must be an object")
    if not isinstance(inputs, list) or not all(isinstance(v, list) for v in inputs):
        raise SchemaViolation("input must be a list of vectors")
    for vec in inputs:
        for x in vec:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise SchemaViolation("input entries must be numbers")
    return EvaluationRequest(model_name=name, inputs=inputs, config=config)


def encode_response(resp: EvaluationResponse) -> bytes:
    if resp.ok:
        return _dumps({"output": [list(v) for v in resp.outputs]})
    return _dumps({"error": {"code": resp.error_code, "message": resp.error_message}})


def decode_response(data: bytes) -> EvaluationResponse:
    obj = _loads(data)
    if not isinstance(obj, dict):
        raise SchemaViolation("response body must be a JSON object")
    if "error" in obj:
        err = obj["error"]
        if not isinstance(err, dict) or "code" not in err or "message" not in err:
            raise SchemaViolation("error must carry code and message")
        return EvaluationResponse(error_code=str(err["code"]), error_message=str(err["message"]))
    if "output" not in obj:
        raise SchemaViolation("missing field: output")
    outputs = obj["output"]
    if not isinstance(outputs, list) or not all(isinstance(v, list) for v in outputs):
        raise SchemaViolation("output must be a list of vectors")
    return EvaluationResponse(outputs=outputs)


# --- server -----------------------------------------------------------------

class Model:
    """Base class for servable models.

    Subclasses set ``descriptor`` and implement ``evaluate(inputs, config)``
    returning a list of output vectors matching ``descriptor.output_sizes``.
    """

    descriptor: ModelDescriptor

    def evaluate(self, inputs, config):
        raise NotImplementedError


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "uqlb"

    def log_message(self, fmt, *args):
        pass

    def _reply(self, status: int, payload: dict):
        body = _dumps(payload)
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _reply_error(self, status: int, code: str, message: str):
        self._reply(status, {"error": {"code": code, "message": message}})

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", 0))
        return self.rfile.read(length)

    def _model_for_body(self, obj):
        if not isinstance(obj, dict) or "name" not in obj:
            raise SchemaViolation("missing field: name")
        model = self.server.models.get(obj["name"])
        if model is None:
            raise SchemaViolation(f"unknown model: {obj['name']}")
        return model

    def do_GET(self):
        if self.path == "/info":
            self._reply(200, {
                "protocolVersion": PROTOCOL_VERSION,
                "models": sorted(self.server.models),
            })
        else:
            self._reply_error(404, "NotFound", f"no such endpoint: {self.path}")

    def do_POST(self):
        try:
            body = self._read_body()
            if self.path == "/evaluate":
                self._handle_evaluate(body)
            elif self.path in ("/input-sizes", "/output-sizes", "/model-features"):
                model = self._model_for_body(_loads(body))
                d = model.descriptor
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
        except MalformedBody as exc:
            self._reply_error(400, "MalformedBody", str(exc))
        except SchemaViolation as exc:
            self._reply_error(400, "SchemaViolation", str(exc))
        except Exception as exc:  # noqa: BLE001 - must answer, never drop the connection
            self._reply_error(500, "InternalError", str(exc))

    def _handle_evaluate(self, body: bytes):
        req = decode_request(body)
        model = self.server.models.get(req.model_name)
        if model is None:
            raise SchemaViolation(f"unknown model: {req.model_name}")
        req.validate_against(model.descriptor)
        with self.server.eval_slot:
            outputs = model.evaluate([list(v) for v in req.inputs], req.config)
        resp = EvaluationResponse(outputs=outputs)
        shape = tuple(len(v) for v in resp.outputs)
        if shape != model.descriptor.output_sizes:
            raise SchemaViolation(
                f"model produced shape {shape}, declared {model.descriptor.output_sizes}"
            )
        self._reply(200, {"output": [list(v) for v in resp.outputs]})


class ModelServer(ThreadingHTTPServer):
    daemon_threads = True
    # allow quick rebinds in tests
    allow_reuse_address = True

    def __init__(self, models, port, max_inflight=1):
        self.models = {m.descriptor.name: m for m in models}
        self.eval_slot = threading.BoundedSemaphore(max_inflight)
        try:
            super().__init__(("0.0.0.0", port), _Handler)
        except OSError as exc:
            raise PortInUse(f"port {port}: {exc}") from exc
        self._thread = None

    @property
    def port(self):
        return self.server_address[1]

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def serve_model(models, port=None, max_inflight=1) -> ModelServer:
    """Serve one or more models over HTTP; returns a started server handle.

    ``port=None`` falls back to the PORT environment variable, then 4242.
    ``port=0`` binds an OS-assigned free port.
    """
    if isinstance(models, Model):
        models = [models]
    if port is None:
        port = int(os.getenv("PORT", DEFAULT_PORT))
    return ModelServer(models, port, max_inflight=max_inflight).start()


# --- client -----------------------------------------------------------------

def _post(url, path, payload, timeout):
    try:
        r = requests.post(url.rstrip("/") + path, data=_dumps(payload),
                          headers={"Content-Type": "application/json"}, timeout=timeout)
    except requests.Timeout as exc:
        raise ClientTimeout(str(exc)) from exc
    except requests.ConnectionError as exc:
        raise Unreachable(str(exc)) from exc
    obj = _loads(r.content)
    if isinstance(obj, dict) and "error" in obj:
        err = obj["error"]
        raise RemoteError(err.get("code", "Unknown"), err.get("message", ""))
    return obj


def get_info(url, timeout=10.0) -> dict:
    try:
        r = requests.get(url.rstrip("/") + "/info", timeout=timeout)
    except requests.Timeout as exc:
        raise ClientTimeout(str(exc)) from exc
    except requests.ConnectionError as exc:
        raise Unreachable(str(exc)) from exc
    obj = _loads(r.content)
    if not isinstance(obj, dict) or "models" not in obj:
        raise SchemaViolation("info response missing model list")
    return obj


def get_input_sizes(url, name, config=None, timeout=10.0):
    obj = _post(url, "/input-sizes", {"name": name, "config": config or {}}, timeout)
    return [int(s) for s in obj["inputSizes"]]


def get_output_sizes(url, name, config=None, timeout=10.0):
    obj = _post(url, "/output-sizes", {"name": name, "config": config or {}}, timeout)
    return [int(s) for s in obj["outputSizes"]]


def get_features(url, name, timeout=10.0) -> dict:
    obj = _post(url, "/model-features", {"name": name}, timeout)
    return obj["features"]


def client_evaluate(url, name, inputs, config=None, timeout=300.0):
    """Blocking single evaluation against a protocol server; returns output vectors."""
    req = EvaluationRequest(model_name=name, inputs=inputs, config=config or {})
    try:
        r = requests.post(url.rstrip("/") + "/evaluate", data=encode_request(req),
                          headers={"Content-Type": "application/json"}, timeout=timeout)
    except requests.Timeout as exc:
        raise ClientTimeout(str(exc)) from exc
    except requests.ConnectionError as exc:
        raise Unreachable(str(exc)) from exc
    resp = decode_response(r.content)
    if not resp.ok:
        raise RemoteError(resp.error_code, resp.error_message)
    return [list(v) for v in resp.outputs]


@dataclass(frozen=True)
class HealthStatus:
    ok: bool
    reason: str | None = None

    def __bool__(self):
        return self.ok


def health_check(address, timeout=DEFAULT_HEALTH_TIMEOUT) -> HealthStatus:
    """Healthy iff the info query succeeds within the timeout and reports >= 1 model."""
    url = address if address.startswith("http") else f"http://{address}"
    try:
        info = get_info(url, timeout=timeout)
    except ClientTimeout:
        return HealthStatus(False, "Timeout")
    except Unreachable:
        return HealthStatus(False, "Unreachable")
    except (MalformedBody, SchemaViolation):
        return HealthStatus(False, "MalformedBody")
    if not info.get("models"):
        return HealthStatus(False, "NoModels")
    return HealthStatus(True)


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("", 0))
        return s.getsockname()[1]
