"""Seeded symmetric eigenproblem benchmark solved by cyclic Jacobi rotations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NoConvergence

MAX_SWEEPS = 50


@dataclass(frozen=True)
class EigenTask:
    n: int
    seed: int = 0
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("matrix dimension must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


def generate_matrix(task: EigenTask) -> np.ndarray:
    """Symmetrised seeded uniform(-1, 1) matrix: (A + A^T) / 2."""
    rng = np.random.default_rng(task.seed)
    A = rng.uniform(-1.0, 1.0, size=(task.n, task.n))
    return (A + A.T) / 2.0


def jacobi_eigh(A, tolerance=1e-10, max_sweeps=MAX_SWEEPS):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues descending, eigenvectors as columns in matching order).
    Convergence: off-diagonal Frobenius norm <= tolerance * ||A||_F.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, atol=1e-12):
        raise ValueError("matrix must be symmetric")
    V = np.eye(n)
    norm = np.linalg.norm(A)
    if n == 1 or norm == 0.0:
        return A.diagonal().copy(), V

    def offdiag(M):
        return np.linalg.norm(M - np.diag(M.diagonal()))

    for _ in range(max_sweeps):
        if offdiag(A) <= tolerance * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= tolerance * norm / (n * n):
                    continue
                # rotation angle zeroing A[p, q]
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e8:
                    t = 1.0 / (2.0 * theta)
                elif theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")

    order = np.argsort(A.diagonal())[::-1]
    return A.diagonal()[order].copy(), V[:, order]


def eigen_solve(task: EigenTask, return_vectors=False):
    """Eigenvalues (descending) of the task's seeded symmetric matrix."""
    A = generate_matrix(task)
    vals, vecs = jacobi_eigh(A, tolerance=task.tolerance)
    if return_vectors:
        return vals, vecs
    return vals
