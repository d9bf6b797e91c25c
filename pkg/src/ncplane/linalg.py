"""Small dense symmetric linear algebra: cyclic Jacobi and Cholesky solves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonConvergenceError, RankDeficiencyError

JACOBI_TOL = 1e-13
MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Dense real symmetric matrix; the input is mirrored from its upper triangle."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DomainError("SymmetricMatrix needs a non-empty square array")
        up = np.triu(a)
        object.__setattr__(self, "entries", up + np.triu(a, 1).T)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries.astype(dtype) if dtype else self.entries


def jacobi_eigenvalues(a: SymmetricMatrix | np.ndarray, tol: float = JACOBI_TOL,
                       max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """All eigenvalues, ascending, by cyclic Jacobi rotations.

    Rotations run in fixed row-major (p, q) order so results are
    reproducible.  Iteration stops once the off-diagonal Frobenius norm
    drops below ``tol`` times the Frobenius norm of the input.
    """
    A = np.array(a.entries if isinstance(a, SymmetricMatrix) else
                 SymmetricMatrix(a).entries, dtype=float)
    n = A.shape[0]
    scale = np.linalg.norm(A)
    if n == 1 or scale == 0.0:
        return np.sort(np.diag(A))
    negligible = 1e-3 * tol * scale / n
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off < tol * scale:
            return np.sort(np.diag(A))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                # entries this small cannot move the off-diagonal norm test
                if abs(apq) <= negligible:
                    A[p, q] = A[q, p] = 0.0
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
    raise NonConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")


def cholesky_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a x = b for symmetric positive-definite a."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - np.dot(L[j, :j], L[j, :j])
        if not d > 1e-13 * abs(a[j, j]) or d <= 0:
            raise RankDeficiencyError("matrix is not numerically positive definite")
        L[j, j] = math.sqrt(d)
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    y = np.zeros(n)
    for i in range(n):
        y[i] = (b[i] - np.dot(L[i, :i], y[:i])) / L[i, i]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (y[i] - np.dot(L[i + 1:, i], x[i + 1:])) / L[i, i]
    return x


def least_squares(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients from the column-scaled normal equations."""
    X = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise RankDeficiencyError("design matrix has a zero column")
    Xs = X / norms
    coef = cholesky_solve(Xs.T @ Xs, Xs.T @ y)
    return coef / norms
