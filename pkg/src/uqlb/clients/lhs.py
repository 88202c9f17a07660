"""Seeded Latin hypercube sampling over a named parameter box."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..models.server import GS2_BOX


@dataclass(frozen=True)
class ParameterBox:
    """Axis-aligned box with named dimensions."""

    dims: tuple   # of (name, min, max)

    def __post_init__(self):
        dims = tuple((str(n), float(lo), float(hi)) for n, lo, hi in self.dims)
        object.__setattr__(self, "dims", dims)
        for name, lo, hi in dims:
            if not lo < hi:
                raise ValueError(f"dimension {name}: min must be < max")

    @property
    def ndim(self):
        return len(self.dims)

    @staticmethod
    def from_file(path) -> "ParameterBox":
        with open(path) as f:
            obj = json.load(f)
        return ParameterBox(tuple((d["name"], d["min"], d["max"]) for d in obj["dims"]))


def gs2_box() -> ParameterBox:
    return ParameterBox(GS2_BOX)


def lhs_sample(box: ParameterBox, n, seed, jitter=False):
    """n points with exactly one sample per equal stratum in every dimension.

    Strata assignments are permuted per dimension by a seeded RNG; points sit
    at stratum midpoints unless jitter is requested.  Deterministic in seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    samples = np.empty((n, box.ndim))
    for j, (_, lo, hi) in enumerate(box.dims):
        strata = rng.permutation(n)
        offset = rng.random(n) if jitter else np.full(n, 0.5)
        unit = (strata + offset) / n
        samples[:, j] = lo + unit * (hi - lo)
    return [list(row) for row in samples]
