"""Gaussian-process regression with a squared-exponential kernel.

Zero mean function; posterior mean and variance computed from a Cholesky
factorisation of the regularised kernel matrix.  Hyperparameters are always
supplied explicitly; there is no marginal-likelihood optimisation here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NotPositiveDefinite, NumericalBreakdown

VARIANCE_CLAMP = 1e-9


@dataclass(frozen=True)
class GpKernel:
    """Squared exponential with per-dimension lengthscales."""

    signal_variance: float
    lengthscales: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", tuple(float(l) for l in self.lengthscales))
        if self.signal_variance <= 0 or any(l <= 0 for l in self.lengthscales):
            raise ValueError("signal_variance and lengthscales must be positive")

    def __call__(self, A, B):
        """Cross-covariance matrix between row sets A (N x d) and B (M x d)."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        ell = np.asarray(self.lengthscales)
        if A.shape[1] != ell.size or B.shape[1] != ell.size:
            raise DimensionMismatch(
                f"kernel is {ell.size}-dimensional, got inputs of width {A.shape[1]} and {B.shape[1]}"
            )
        diff = A[:, None, :] - B[None, :, :]
        sq = np.sum(diff**2 / (2.0 * ell**2), axis=-1)
        return self.signal_variance * np.exp(-sq)


@dataclass(frozen=True)
class GpModel:
    X: np.ndarray            # N x d training inputs
    y: np.ndarray            # N training targets
    kernel: GpKernel
    noise_sd: float
    factor: np.ndarray       # lower-triangular Cholesky factor of K + noise_sd^2 I
    alpha: np.ndarray        # (K + noise_sd^2 I)^-1 y

    @property
    def n_train(self):
        return self.X.shape[0]


def gp_fit(X, y, kernel: GpKernel, noise_sd: float = 0.0) -> GpModel:
    """Condition a zero-mean GP on data; O(N^3) Cholesky factorisation."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    if X.size == 0:
        X = X.reshape(0, len(kernel.lengthscales))
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} training inputs but {y.size} targets")
    if X.shape[0] == 0:
        empty = np.zeros((0, 0))
        return GpModel(X=X, y=y, kernel=kernel, noise_sd=noise_sd,
                       factor=empty, alpha=np.zeros(0))
    K = kernel(X, X) + noise_sd**2 * np.eye(X.shape[0])
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            "kernel matrix is not positive definite (duplicate points with zero noise?)"
        ) from exc
    alpha = np.linalg.solve(L.T, np.linalg.solve(L, y))
    return GpModel(X=X, y=y, kernel=kernel, noise_sd=noise_sd, factor=L, alpha=alpha)


def gp_predict(model: GpModel, x_star) -> tuple[float, float]:
    """Posterior mean and variance at a single point."""
    x_star = np.asarray(x_star, dtype=float).ravel()
    if x_star.size != len(model.kernel.lengthscales):
        raise DimensionMismatch(
            f"expected {len(model.kernel.lengthscales)}-vector, got {x_star.size}"
        )
    prior_var = model.kernel.signal_variance
    if model.n_train == 0:
        return 0.0, prior_var
    k_star = model.kernel(model.X, x_star[None, :])[:, 0]
    mean = float(k_star @ model.alpha)
    v = np.linalg.solve(model.factor, k_star)
    var = float(prior_var - v @ v)
    if var < -VARIANCE_CLAMP:
        raise NumericalBreakdown(f"posterior variance {var} below tolerance")
    return mean, max(var, 0.0)


# --- multi-output convenience ----------------------------------------------

def gp_fit_multi(X, Y, kernel: GpKernel, noise_sd: float = 0.0) -> list[GpModel]:
    """Independent single-output GPs sharing the same training inputs."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    return [gp_fit(X, Y[:, j], kernel, noise_sd) for j in range(Y.shape[1])]


def synthetic_training_data(box, n, seed, n_outputs=2):
    """Draws from a known sum-of-sines function over a parameter box.

    Stand-in training set for surrogate benchmarks; deterministic in seed.
    """
    box = np.asarray(box, dtype=float)   # d x 2 (min, max)
    rng = np.random.default_rng(seed)
    d = box.shape[0]
    X = box[:, 0] + rng.random((n, d)) * (box[:, 1] - box[:, 0])
    widths = box[:, 1] - box[:, 0]
    Y = np.stack(
        [np.sum(np.sin((j + 1) * np.pi * (X - box[:, 0]) / widths), axis=1)
         for j in range(n_outputs)],
        axis=1,
    )
    return X, Y
