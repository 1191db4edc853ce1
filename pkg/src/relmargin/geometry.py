"""Cosine similarity kernels with analytic gradients.

Embeddings are kept unnormalized; every function here normalizes
internally. Zero-norm inputs raise :class:`DegenerateVectorError` instead of
producing NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from relmargin._backend import kernels
from relmargin.errors import DegenerateVectorError, ShapeError


def as_vector(values, name="vector") -> np.ndarray:
    """Validate and convert to a 1-D float64 array (D >= 2, finite)."""
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {v.shape}")
    if v.shape[0] < 2:
        raise ShapeError(f"{name} needs dimension >= 2, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise DegenerateVectorError(f"{name} has non-finite entries")
    return v


def as_matrix(rows, name="matrix") -> np.ndarray:
    m = np.ascontiguousarray(rows, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be a list of vectors, got shape {m.shape}")
    if m.shape[1] < 2:
        raise ShapeError(f"{name} needs dimension >= 2, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise DegenerateVectorError(f"{name} has non-finite entries")
    return m


def cosine(a, b) -> float:
    """Cosine similarity ``a.b / (|a||b|)``, symmetric in its arguments."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(kernels.cosine_pair(a, b))


def cosine_grad(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of :func:`cosine` with respect to ``a`` and ``b``."""
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    phi = cosine(a, b)
    na = math.sqrt(float(np.cumsum(a * a)[-1]))
    nb = math.sqrt(float(np.cumsum(b * b)[-1]))
    inv = 1.0 / (na * nb)
    return b * inv - (phi / (na * na)) * a, a * inv - (phi / (nb * nb)) * b


@dataclass(frozen=True)
class SimMatrix:
    """Cosine similarities between two vector lists, ``entries[i, j] = cos(row_i, col_j)``."""

    entries: np.ndarray
    row_role: str = "rows"
    col_role: str = "cols"

    @property
    def shape(self):
        return self.entries.shape


def pairwise_sim(rows, cols, row_role="rows", col_role="cols") -> SimMatrix:
    X = as_matrix(rows, row_role)
    Y = as_matrix(cols, col_role)
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"dimension mismatch: {row_role} D={X.shape[1]}, {col_role} D={Y.shape[1]}")
    return SimMatrix(kernels.pairwise_cosine(X, Y), row_role, col_role)


def sim_stats(m) -> tuple[float, float, float]:
    """(mean, min, max) over every entry; the mean uses a correctly rounded sum."""
    entries = m.entries if isinstance(m, SimMatrix) else np.asarray(m, dtype=np.float64)
    if entries.size == 0:
        raise ShapeError("sim_stats of an empty matrix")
    flat = entries.ravel()
    return math.fsum(flat.tolist()) / flat.size, float(flat.min()), float(flat.max())
