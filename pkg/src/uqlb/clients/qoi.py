"""Quantity-of-interest client: nested quadrature of a black-box integrand.

Computes  P * integral over k_y of (1/theta0_max) * integral over theta0 of
f(k_y, theta0), with P = Q0 * Lambda^(alpha-1) / (rho_star * c_s).  The model
is treated as a black box returning the integrand value for input
[k_y, theta0].
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import protocol
from ..errors import NonFiniteIntegrand

TRAPEZOID = "trapezoid"
GAUSS_LEGENDRE = "gauss-legendre"


@dataclass(frozen=True)
class QoIConfig:
    ky_min: float = 0.0
    ky_max: float = 1.0
    ky_nodes: int = 32
    theta0_max: float = 1.0
    theta0_nodes: int = 32
    rule: str = TRAPEZOID
    q0: float = 1.0
    lam: float = 1.0
    alpha: float = 1.0
    rho_star: float = 1.0
    c_s: float = 1.0
    queue_depth: int = 2

    def __post_init__(self):
        if self.ky_nodes < 2 or self.theta0_nodes < 2:
            raise ValueError("node counts must be >= 2")
        if self.theta0_max <= 0:
            raise ValueError("theta0_max must be positive")
        if self.rule not in (TRAPEZOID, GAUSS_LEGENDRE):
            raise ValueError(f"unknown quadrature rule: {self.rule}")

    @property
    def prefactor(self):
        return self.q0 * self.lam ** (self.alpha - 1.0) / (self.rho_star * self.c_s)

    @staticmethod
    def from_file(path) -> "QoIConfig":
        with open(path) as f:
            return QoIConfig(**json.load(f))


def quadrature_nodes(a, b, n, rule):
    """Nodes and weights integrating over [a, b]."""
    if rule == TRAPEZOID:
        nodes = np.linspace(a, b, n)
        h = (b - a) / (n - 1)
        weights = np.full(n, h)
        weights[0] = weights[-1] = h / 2.0
        return nodes, weights
    nodes, weights = np.polynomial.legendre.leggauss(n)
    half = (b - a) / 2.0
    return half * nodes + (a + b) / 2.0, half * weights


def nested_quadrature(f, cfg: QoIConfig) -> float:
    """Apply the configured nested rule to a plain callable f(k_y, theta0)."""
    ky, wk = quadrature_nodes(cfg.ky_min, cfg.ky_max, cfg.ky_nodes, cfg.rule)
    th, wt = quadrature_nodes(0.0, cfg.theta0_max, cfg.theta0_nodes, cfg.rule)
    total = 0.0
    for k, wk_i in zip(ky, wk):
        inner = 0.0
        for t, wt_j in zip(th, wt):
            val = f(k, t)
            if not math.isfinite(val):
                raise NonFiniteIntegrand(f"f({k}, {t}) = {val}")
            inner += wt_j * val
        total += wk_i * inner / cfg.theta0_max
    return cfg.prefactor * total


def qoi_integral(model_url, cfg: QoIConfig, model_name=None, config=None) -> float:
    """Evaluate the QoI against a protocol server (or balancer) URL.

    Model evaluations at the quadrature grid are issued concurrently with at
    most cfg.queue_depth in flight.
    """
    info = protocol.get_info(model_url)
    name = model_name or sorted(info["models"])[0]
    ky, _ = quadrature_nodes(cfg.ky_min, cfg.ky_max, cfg.ky_nodes, cfg.rule)
    th, _ = quadrature_nodes(0.0, cfg.theta0_max, cfg.theta0_nodes, cfg.rule)
    points = [(k, t) for k in ky for t in th]

    def evaluate(point):
        out = protocol.client_evaluate(model_url, name, [[point[0], point[1]]],
                                       config or {})
        return float(out[0][0])

    with ThreadPoolExecutor(max_workers=cfg.queue_depth) as pool:
        values = dict(zip(points, pool.map(evaluate, points)))

    cache = dict(values)
    return nested_quadrature(lambda k, t: cache[(k, t)], cfg)
