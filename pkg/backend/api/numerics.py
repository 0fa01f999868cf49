"""Dense float64 vectors, matrices, norms and elementwise nonlinearities."""

from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np

logger = logging.getLogger(__name__)

POWER_TOL = 1e-10
POWER_MAX_ITER = 10_000


class ConvergenceError(ArithmeticError):
    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class MatrixNorms(NamedTuple):
    linf: float
    induced1: float
    spectral: float


def as_matrix(values) -> np.ndarray:
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2 or matrix.size == 0:
        raise ValueError(f"expected a nonempty 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix entries must be finite")
    return matrix


def soft_threshold(v, lam: float) -> np.ndarray:
    """sign(v) * max(|v| - lam, 0), elementwise. Works on arrays of any shape."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def relu(v) -> np.ndarray:
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def clip(v, lo: float, hi: float) -> np.ndarray:
    if lo > hi:
        raise ValueError(f"clip bounds out of order: lo={lo} > hi={hi}")
    return np.clip(np.asarray(v, dtype=np.float64), lo, hi)


def linf_norm(M) -> float:
    """Maximal row L1 norm."""
    return float(np.max(np.sum(np.abs(M), axis=1)))


def induced1_norm(M) -> float:
    """Maximal column L1 norm."""
    return float(np.max(np.sum(np.abs(M), axis=0)))


def _power_iterate(gram: np.ndarray, start: np.ndarray) -> float:
    v = start / np.linalg.norm(start)
    estimate = 0.0
    for iteration in range(1, POWER_MAX_ITER + 1):
        w = gram @ v
        current = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        if abs(current - estimate) <= POWER_TOL * abs(current):
            logger.debug("power iteration converged after %d iterations", iteration)
            return current
        estimate = current
        v = w / norm_w
    raise ConvergenceError("power iteration did not reach relative tolerance", POWER_MAX_ITER)


def spectral_norm(M) -> float:
    """Largest singular value by power iteration on M^T M.

    The all-ones start is orthogonal to the dominant direction for some
    structured matrices (real DFT rows sum to zero), so a ramp start is run
    as well. Both Rayleigh quotients are lower bounds; the larger is kept.
    """
    M = np.asarray(M, dtype=np.float64)
    gram = M.T @ M
    n = gram.shape[0]
    ones = np.ones(n)
    ramp = 1.0 + np.arange(n, dtype=np.float64) / n
    eigen = max(_power_iterate(gram, ones), _power_iterate(gram, ramp))
    return float(np.sqrt(max(eigen, 0.0)))


def matrix_norms(M) -> MatrixNorms:
    M = as_matrix(M)
    return MatrixNorms(
        linf=linf_norm(M),
        induced1=induced1_norm(M),
        spectral=spectral_norm(M),
    )
