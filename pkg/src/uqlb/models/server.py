"""Benchmark model servers and their command-line entry point.

Registration contract: the server picks a free port, starts serving, then
atomically writes "host:port" (newline-terminated) to the registration file.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import tempfile

import numpy as np

from ..errors import UqlbError
from ..protocol import Model, ModelDescriptor, serve_model
from .eigen import EigenTask, eigen_solve
from .gp import GpKernel, gp_fit_multi, gp_predict, synthetic_training_data
from .synthetic import DurationModel, SyntheticTask, synthetic_evaluate

# GS2 input parameter box (name, min, max); 7 dimensions
GS2_BOX = (
    ("safety_factor", 2.0, 9.0),
    ("magnetic_shear", 0.0, 5.0),
    ("electron_density_gradient", 0.0, 10.0),
    ("electron_temperature_gradient", 0.5, 6.0),
    ("pressure_ratio", 0.0, 0.3),
    ("collision_frequency", 0.0, 0.1),
    ("binormal_wavelength", 0.0, 1.0),
)


class ExampleModel(Model):
    """Identity map; the minimal conforming model."""

    def __init__(self, dim=1, name="modelname"):
        self.descriptor = ModelDescriptor(name=name, input_sizes=[dim], output_sizes=[dim])

    def evaluate(self, inputs, config):
        return [list(v) for v in inputs]


class EigenModel(Model):
    """Solves the seeded symmetric eigenproblem on every evaluation.

    The input vector is accounting-only (all evaluations share one matrix,
    keeping repeated runs comparable); output is the eigenvalue spectrum.
    """

    def __init__(self, n=100, seed=0, name="eigen"):
        self.task = EigenTask(n=n, seed=seed, tolerance=1e-8)
        self.descriptor = ModelDescriptor(name=name, input_sizes=[1], output_sizes=[n])

    def evaluate(self, inputs, config):
        return [list(eigen_solve(self.task))]


class GpSurrogateModel(Model):
    """Multi-output GP surrogate over the 7-dim input box; 2 scalar outputs."""

    def __init__(self, train_data=None, seed=0, n_train=64, name="gp",
                 signal_variance=1.0, lengthscale=1.0, noise_sd=1e-6):
        box = [(lo, hi) for _, lo, hi in GS2_BOX]
        if train_data is not None:
            X, Y = load_training_csv(train_data)
        else:
            X, Y = synthetic_training_data(box, n_train, seed, n_outputs=2)
        d = X.shape[1]
        # one shared lengthscale per unit box width keeps conditioning sane
        widths = np.array([hi - lo for lo, hi in box[:d]]) if d == len(box) else np.ones(d)
        kernel = GpKernel(signal_variance, tuple(lengthscale * widths))
        self.gps = gp_fit_multi(X, Y, kernel, noise_sd)
        self.descriptor = ModelDescriptor(
            name=name, input_sizes=[d], output_sizes=[len(self.gps)]
        )

    def evaluate(self, inputs, config):
        x = inputs[0]
        return [[gp_predict(gp, x)[0] for gp in self.gps]]


class SyntheticModel(Model):
    """Sleeps or busy-works for a seeded input-dependent duration."""

    def __init__(self, duration_model: DurationModel, seed=0, dim=1, name="synthetic"):
        self.task = SyntheticTask(duration_model=duration_model, seed=seed)
        self.descriptor = ModelDescriptor(name=name, input_sizes=[dim], output_sizes=[1])

    def evaluate(self, inputs, config):
        return [synthetic_evaluate(self.task, inputs[0])]


def load_training_csv(path):
    """CSV with a header row: d input columns then the output columns (x* / y* prefixes)."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    n_out = sum(1 for h in header if h.startswith("y"))
    if n_out == 0:
        n_out = 1
    data = np.asarray(rows)
    return data[:, :-n_out], data[:, -n_out:]


def write_registration(path, host, port):
    """Atomic write + fsync so a polling reader never sees a partial line."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".reg-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(f"{host}:{port}\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
        dir_fd = os.open(directory, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def serve_benchmark(model: Model, registration_file, host="127.0.0.1"):
    """Serve on an OS-assigned free port and register host:port on disk."""
    server = serve_model(model, port=0)
    try:
        write_registration(registration_file, host, server.port)
    except OSError as exc:
        server.stop()
        raise UqlbError(f"cannot write registration file {registration_file}: {exc}") from exc
    return server


def build_model(args) -> Model:
    if args.model == "eigen":
        return EigenModel(n=args.n, seed=args.seed)
    if args.model == "gp":
        return GpSurrogateModel(train_data=args.train_data, seed=args.seed)
    if args.model == "synthetic":
        dur = DurationModel.constant(args.duration)
        return SyntheticModel(dur, seed=args.seed, dim=args.input_dim)
    if args.model == "example":
        return ExampleModel(dim=args.input_dim)
    raise ValueError(f"unknown model kind: {args.model}")


def main(argv=None):
    parser = argparse.ArgumentParser(description="Serve a benchmark model over HTTP")
    parser.add_argument("--model", required=True,
                        choices=["eigen", "gp", "synthetic", "example"])
    parser.add_argument("--n", type=int, default=100, help="eigen matrix dimension")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--train-data", default=None, help="GP training CSV")
    parser.add_argument("--duration", type=float, default=0.05,
                        help="constant duration for the synthetic model (seconds)")
    parser.add_argument("--input-dim", type=int, default=1)
    parser.add_argument("--reg-file", default=None,
                        help="registration file; when given the port is OS-assigned")
    parser.add_argument("--port", type=int, default=None,
                        help="listen port (default: PORT env var, then 4242)")
    args = parser.parse_args(argv)

    model = build_model(args)
    try:
        if args.reg_file:
            server = serve_benchmark(model, args.reg_file)
        else:
            server = serve_model(model, port=args.port)
    except UqlbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"serving {model.descriptor.name} on port {server.port}", flush=True)
    try:
        server._thread.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
