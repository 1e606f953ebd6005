"""Proximal operators used by the solver Z-step, plus the simplex projection.

Both operators are pure functions and can be applied concurrently. The
rowwise variant exists because the Z update treats every row of the
splitting variable independently.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInput, InvalidParameter


def prox_positive_misto(v, alpha: float) -> np.ndarray:
    """Positively constrained multidimensional shrinkage thresholding.

    Returns the unique minimizer of ``0.5*||z - v||^2 + alpha*||z||_2`` over
    ``z >= 0``. The positive part of ``v`` is taken first; if its Euclidean
    norm falls below ``alpha`` the result is the zero vector, otherwise the
    positive part is shrunk by the factor ``1 - alpha/norm``.
    """
    v = np.asarray(v, dtype=np.float64)
    if alpha < 0:
        raise InvalidParameter(f"threshold must be nonnegative, got {alpha}")
    if v.ndim != 1 or v.size == 0:
        raise InvalidInput("input must be a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("input vector contains non-finite entries")
    p = np.maximum(v, 0.0)
    norm = float(np.linalg.norm(p))
    if norm < alpha or norm == 0.0:
        return np.zeros_like(p)
    return (1.0 - alpha / norm) * p


def prox_positive_misto_rows(v: np.ndarray, alpha: float) -> np.ndarray:
    """Apply :func:`prox_positive_misto` to every row of a matrix."""
    p = np.maximum(v, 0.0)
    norms = np.linalg.norm(p, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    scale = np.where(norms < alpha, 0.0, 1.0 - alpha / safe)
    return scale[:, None] * p


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto ``{z : z >= 0, sum(z) = 1}``.

    Sort-based thresholding; cost O(n log n).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise InvalidInput("input must be a non-empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("input vector contains non-finite entries")
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u)
    counts = np.arange(1, v.size + 1)
    support = counts[u + (1.0 - cumulative) / counts > 0.0][-1]
    shift = (1.0 - cumulative[support - 1]) / support
    return np.maximum(v + shift, 0.0)


def project_simplex_columns(v: np.ndarray) -> np.ndarray:
    """Project every column of a matrix onto the probability simplex.

    Equivalent to calling :func:`project_simplex` per column; the indices
    satisfying the sorted threshold test always form a prefix, so the
    support size per column is the count of rows passing it.
    """
    u = np.sort(v, axis=0)[::-1, :]
    cumulative = np.cumsum(u, axis=0)
    counts = np.arange(1, v.shape[0] + 1)[:, None]
    support = np.count_nonzero(u + (1.0 - cumulative) / counts > 0.0, axis=0)
    shift = (1.0 - cumulative[support - 1, np.arange(v.shape[1])]) / support
    return np.maximum(v + shift[None, :], 0.0)
