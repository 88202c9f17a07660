"""Controlled-duration synthetic model standing in for input-dependent runtimes."""

from __future__ import annotations

import hashlib
import struct
import time
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DurationModel:
    """Draws non-negative durations: constant, uniform, lognormal or bimodal mixture."""

    kind: str                           # constant | uniform | lognormal | bimodal
    params: tuple = ()
    fast: "DurationModel | None" = None
    slow: "DurationModel | None" = None

    def __post_init__(self):
        if self.kind not in ("constant", "uniform", "lognormal", "bimodal"):
            raise ValueError(f"unknown duration model: {self.kind}")
        if self.kind == "bimodal" and (self.fast is None or self.slow is None):
            raise ValueError("bimodal needs fast and slow component distributions")

    def draw(self, rng) -> float:
        if self.kind == "constant":
            d = self.params[0]
        elif self.kind == "uniform":
            a, b = self.params
            d = rng.uniform(a, b)
        elif self.kind == "lognormal":
            mu, sigma = self.params
            d = rng.lognormal(mu, sigma)
        else:
            p_slow = self.params[0]
            branch = self.slow if rng.random() < p_slow else self.fast
            d = branch.draw(rng)
        if d < 0:
            raise ValueError("drawn duration is negative")
        return float(d)

    @staticmethod
    def constant(t):
        return DurationModel("constant", (float(t),))

    @staticmethod
    def uniform(a, b):
        return DurationModel("uniform", (float(a), float(b)))

    @staticmethod
    def lognormal(mu, sigma):
        return DurationModel("lognormal", (float(mu), float(sigma)))

    @staticmethod
    def bimodal(p_slow, fast, slow):
        return DurationModel("bimodal", (float(p_slow),), fast=fast, slow=slow)

    @staticmethod
    def from_dict(obj: dict) -> "DurationModel":
        kind = obj["kind"]
        if kind == "bimodal":
            return DurationModel.bimodal(obj["p_slow"],
                                         DurationModel.from_dict(obj["fast"]),
                                         DurationModel.from_dict(obj["slow"]))
        if kind == "constant":
            return DurationModel.constant(obj["t"])
        if kind == "uniform":
            return DurationModel.uniform(obj["a"], obj["b"])
        if kind == "lognormal":
            return DurationModel.lognormal(obj["mu"], obj["sigma"])
        raise ValueError(f"unknown duration model: {kind}")


@dataclass(frozen=True)
class SyntheticTask:
    duration_model: DurationModel
    seed: int = 0
    busy: bool = False   # busy-wait instead of sleeping


def _input_digest(input_vector) -> int:
    payload = struct.pack(f"<{len(input_vector)}d", *[float(x) for x in input_vector])
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def draw_duration(task: SyntheticTask, input_vector) -> float:
    """Deterministic duration from (seed, input hash)."""
    rng = np.random.default_rng([task.seed & 0xFFFFFFFFFFFFFFFF, _input_digest(input_vector)])
    return task.duration_model.draw(rng)


def synthetic_evaluate(task: SyntheticTask, input_vector) -> list[float]:
    """Occupies the CPU or sleeps for the drawn duration; returns actual elapsed seconds."""
    duration = draw_duration(task, input_vector)
    t0 = time.perf_counter()
    if task.busy:
        while time.perf_counter() - t0 < duration:
            pass
    else:
        time.sleep(duration)
    return [time.perf_counter() - t0]
