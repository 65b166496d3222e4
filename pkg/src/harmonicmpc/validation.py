"""Input validation helpers (array coercion and shape checks)."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def as_matrix(M, name: str, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Coerce to a 2-D float array, optionally enforcing an exact shape."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got ndim={M.ndim}")
    if shape is not None and M.shape != shape:
        raise DimensionError(f"{name} must have shape {shape}, got {M.shape}")
    return M


def as_vector(v, name: str, size: int | None = None) -> np.ndarray:
    """Coerce to a 1-D float array, optionally enforcing an exact length."""
    v = np.asarray(v, dtype=float).ravel()
    if size is not None and v.size != size:
        raise DimensionError(f"{name} must have length {size}, got {v.size}")
    return v


def check_positive_definite(M: np.ndarray, name: str) -> None:
    M = np.asarray(M, dtype=float)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got {M.shape}")
    if not np.allclose(M, M.T, atol=1e-10):
        raise ValueError(f"{name} must be symmetric")
    eigvals = np.linalg.eigvalsh(M)
    if eigvals.min() <= 0:
        raise ValueError(f"{name} must be positive definite (min eig {eigvals.min():.3e})")


def check_diagonal(M: np.ndarray, name: str) -> None:
    M = np.asarray(M, dtype=float)
    if np.any(M - np.diag(np.diag(M)) != 0):
        raise ValueError(f"{name} must be diagonal")
